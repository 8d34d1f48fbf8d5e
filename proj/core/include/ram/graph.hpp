#pragma once

#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "ram/params.hpp"
#include "ram/tensor.hpp"

namespace ram {

template <typename T>
class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only tape of operations. Nodes are stored in creation order, which
/// is a topological order, so backward is a single reverse sweep.
template <typename T>
class Graph {
 public:
  /// Receives the graph and the gradient flowing into the node's output.
  using BackwardFn = std::function<void(Graph&, const Tensor<T>&)>;

  Graph() = default;
  /// With tracking off, parameters enter as constants and no backward
  /// closures are kept (inference).
  explicit Graph(bool track_gradients) : tracking_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> variable(Tensor<T> value);

  /// Leaf bound to parameter `index` of `store`; repeated calls return the
  /// same node, so shared weights accumulate into one gradient.
  Var<T> parameter(const ParamStore<T>& store, std::size_t index);

  /// Records an op output. It requires a gradient iff any input does; when
  /// none does the backward function is dropped.
  Var<T> record(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }
  bool needs_grad(const Var<T>& v) const { return needs_grad(v.id()); }

  /// Mutable gradient buffer for node `id`, zero-filled on first access.
  Tensor<T>& grad_buffer(std::size_t id);

  /// Reverse sweep from a 1x1 loss. Returns gradients for every parameter
  /// leaf reachable from the loss, aligned with `param_count` slots.
  Gradients<T> backward(const Var<T>& loss, std::size_t param_count);

  /// Gradient of an arbitrary node after backward (zeros if none flowed).
  Tensor<T> grad(const Var<T>& v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t backward_visits() const noexcept { return backward_visits_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool has_grad = false;
    bool needs_grad = false;
    long param_index = -1;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const void*, std::unordered_map<std::size_t, std::size_t>> param_nodes_;
  bool tracking_ = true;
  bool backward_done_ = false;
  std::size_t backward_visits_ = 0;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace ram
