#pragma once

#include <cstdint>
#include <vector>

#include "ram/params.hpp"

namespace ram {

struct AdamOptions {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are lazily shaped after the parameters
/// on the first step; parameters without a gradient in a step are skipped.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(ParamStore<T>& params, const Gradients<T>& grads);

  std::uint64_t step_count() const noexcept { return step_count_; }
  const AdamOptions& options() const noexcept { return options_; }
  const Tensor<T>& first_moment(std::size_t i) const { return first_.at(i); }
  const Tensor<T>& second_moment(std::size_t i) const { return second_.at(i); }

 private:
  AdamOptions options_;
  std::uint64_t step_count_ = 0;
  std::vector<Tensor<T>> first_;
  std::vector<Tensor<T>> second_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace ram
