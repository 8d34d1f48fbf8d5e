#include "ram/graph.hpp"

namespace ram {

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node node;
  value.set_requires_grad(false);
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::variable(Tensor<T> value) {
  Node node;
  value.set_requires_grad(true);
  node.value = std::move(value);
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::parameter(const ParamStore<T>& store, std::size_t index) {
  auto& cache = param_nodes_[&store];
  if (auto it = cache.find(index); it != cache.end()) return Var<T>(this, it->second);
  Var<T> v = tracking_ ? variable(store.value(index)) : constant(store.value(index));
  if (tracking_) nodes_.back().param_index = static_cast<long>(index);
  cache[index] = v.id();
  return v;
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (auto id : inputs) {
    if (nodes_.at(id).needs_grad) {
      node.needs_grad = true;
      break;
    }
  }
  if (node.needs_grad) node.backward = std::move(backward);
  node.value.set_requires_grad(node.needs_grad);
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(std::size_t id) {
  Node& node = nodes_.at(id);
  if (!node.has_grad) {
    node.grad = Tensor<T>(node.value.shape(), T(0));
    node.has_grad = true;
  }
  return node.grad;
}

template <typename T>
Gradients<T> Graph<T>::backward(const Var<T>& loss, std::size_t param_count) {
  if (loss.value().size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (backward_done_) throw ContractError("backward already ran on this graph");
  backward_done_ = true;
  Gradients<T> result(param_count);
  if (!nodes_.at(loss.id()).needs_grad) return result;

  grad_buffer(loss.id()).fill(T(1));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad || !node.needs_grad) continue;
    ++backward_visits_;
    if (node.backward) node.backward(*this, node.grad);
    if (node.param_index >= 0) {
      result.accumulate(static_cast<std::size_t>(node.param_index), node.grad);
    }
  }
  return result;
}

template <typename T>
Tensor<T> Graph<T>::grad(const Var<T>& v) const {
  const Node& node = nodes_.at(v.id());
  if (node.has_grad) return node.grad;
  return Tensor<T>(node.value.shape(), T(0));
}

template class Graph<float>;
template class Graph<double>;

}  // namespace ram
