#include "ram/params.hpp"

#include <cmath>

namespace ram {

template <typename T>
std::size_t ParamStore<T>::add(const std::string& name, Tensor<T> init) {
  if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
  init.set_requires_grad(true);
  index_[name] = values_.size();
  names_.push_back(name);
  values_.push_back(std::move(init));
  return values_.size() - 1;
}

template <typename T>
std::size_t ParamStore<T>::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

template <typename T>
void Gradients<T>::accumulate(std::size_t i, const Tensor<T>& g) {
  if (i >= grads_.size()) throw ContractError("gradient index out of range");
  if (!present_[i]) {
    grads_[i] = g;
    present_[i] = true;
    return;
  }
  if (grads_[i].shape() != g.shape()) {
    throw DimensionError("gradient shape " + shape_string(g.shape()) + " vs " + shape_string(grads_[i].shape()));
  }
  auto dst = grads_[i].values();
  auto src = g.values();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

template <typename T>
void Gradients<T>::merge(const Gradients& other) {
  if (grads_.empty()) {
    *this = other;
    return;
  }
  if (other.size() != size()) throw ContractError("merging gradients of different parameter sets");
  for (std::size_t i = 0; i < other.size(); ++i) {
    if (other.has(i)) accumulate(i, other.get(i));
  }
}

template <typename T>
void Gradients<T>::scale(T factor) {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (!present_[i]) continue;
    for (auto& v : grads_[i].values()) v *= factor;
  }
}

template <typename T>
T Gradients<T>::global_norm() const {
  double sq = 0.0;
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (!present_[i]) continue;
    for (auto v : grads_[i].values()) sq += double(v) * double(v);
  }
  return static_cast<T>(std::sqrt(sq));
}

template <typename T>
T Gradients<T>::clip_global_norm(T max_norm) {
  const T norm = global_norm();
  if (norm > max_norm && norm > T(0)) scale(max_norm / norm);
  return norm;
}

template <typename T>
std::size_t Gradients<T>::present_count() const {
  std::size_t n = 0;
  for (bool p : present_) n += p ? 1 : 0;
  return n;
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Gradients<float>;
template class Gradients<double>;

}  // namespace ram
