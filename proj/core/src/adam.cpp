#include "ram/adam.hpp"

#include <cmath>

namespace ram {

template <typename T>
void Adam<T>::step(ParamStore<T>& params, const Gradients<T>& grads) {
  if (grads.size() != params.size()) {
    throw ContractError("adam: " + std::to_string(grads.size()) + " gradient slots for " +
                        std::to_string(params.size()) + " parameters");
  }
  if (first_.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_.emplace_back(params.value(i).shape(), T(0));
      second_.emplace_back(params.value(i).shape(), T(0));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads.has(i) && grads.get(i).shape() != params.value(i).shape()) {
      throw ContractError("adam: gradient " + shape_string(grads.get(i).shape()) + " for parameter " +
                          params.name(i) + " of shape " + shape_string(params.value(i).shape()));
    }
  }

  ++step_count_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, double(step_count_));
  const double correction2 = 1.0 - std::pow(b2, double(step_count_));
  const double step_size = options_.lr / correction1;
  const double sqrt_c2 = std::sqrt(correction2);

  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads.has(i)) continue;
    auto p = params.value(i).values();
    auto g = grads.get(i).values();
    auto m = first_[i].values();
    auto v = second_[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = T(b1 * m[j] + (1.0 - b1) * g[j]);
      v[j] = T(b2 * v[j] + (1.0 - b2) * double(g[j]) * g[j]);
      const double denom = std::sqrt(double(v[j])) / sqrt_c2 + options_.epsilon;
      p[j] = T(p[j] - step_size * m[j] / denom);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace ram
