#pragma once

#include <map>
#include <string>
#include <vector>

#include "ram/tensor.hpp"

namespace ram {

/// Named, ordered collection of trainable tensors. Indices are stable for the
/// lifetime of the store and are what the graph uses to refer to parameters.
template <typename T>
class ParamStore {
 public:
  std::size_t add(const std::string& name, Tensor<T> init);

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor<T>& value(std::size_t i) { return values_.at(i); }
  const Tensor<T>& value(std::size_t i) const { return values_.at(i); }

  /// Total scalar count across all parameters.
  std::size_t scalar_count() const;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (std::size_t i = 0; i < values_.size(); ++i) out.add(names_[i], values_[i].template cast<U>());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::map<std::string, std::size_t> index_;
};

/// Per-parameter gradients aligned with a ParamStore. Parameters the loss
/// never touched are absent (and read as zero).
template <typename T>
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::size_t count) : grads_(count), present_(count, false) {}

  std::size_t size() const noexcept { return grads_.size(); }
  bool has(std::size_t i) const { return i < present_.size() && present_[i]; }
  const Tensor<T>& get(std::size_t i) const { return grads_.at(i); }

  /// Adds `g` into slot i, allocating it on first use.
  void accumulate(std::size_t i, const Tensor<T>& g);
  void merge(const Gradients& other);
  void scale(T factor);
  T global_norm() const;
  /// Rescales so the global L2 norm is at most `max_norm`; returns the norm before clipping.
  T clip_global_norm(T max_norm);
  std::size_t present_count() const;

 private:
  std::vector<Tensor<T>> grads_;
  std::vector<bool> present_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class Gradients<float>;
extern template class Gradients<double>;

}  // namespace ram
