#pragma once

#include <random>
#include <string>

#include "ram/graph.hpp"
#include "ram/ops.hpp"

namespace ram {

// Parameter groups are plain index bundles into a ParamStore; the store owns
// the values. Apply functions bind them to a graph on first use.

struct Linear {
  std::size_t weight = 0;  // in x out
  std::size_t bias = 0;    // 1 x out
};

struct LayerNormParams {
  std::size_t gain = 0;
  std::size_t bias = 0;
};

struct AttentionParams {
  Linear query, key, value, output;
};

struct FeedForwardParams {
  Linear inner, outer;
};

namespace init {

template <typename T>
Tensor<T> normal(Shape shape, double stddev, std::mt19937_64& rng);

/// Normal samples redrawn until they fall within two standard deviations.
template <typename T>
Tensor<T> truncated_normal(Shape shape, double stddev, std::mt19937_64& rng);

template <typename T>
Tensor<T> uniform(Shape shape, double bound, std::mt19937_64& rng);

}  // namespace init

/// Weight ~ U(-1/sqrt(in), 1/sqrt(in)), bias zero.
template <typename T>
Linear make_linear(ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
                   std::mt19937_64& rng);
template <typename T>
LayerNormParams make_layer_norm(ParamStore<T>& store, const std::string& name, std::size_t width);
template <typename T>
AttentionParams make_attention(ParamStore<T>& store, const std::string& name, std::size_t width,
                               std::mt19937_64& rng);
template <typename T>
FeedForwardParams make_feed_forward(ParamStore<T>& store, const std::string& name, std::size_t width,
                                    std::size_t inner, std::mt19937_64& rng);

template <typename T>
Var<T> apply(Graph<T>& g, const ParamStore<T>& store, const Linear& layer, const Var<T>& x) {
  return add_row(matmul(x, g.parameter(store, layer.weight)), g.parameter(store, layer.bias));
}

template <typename T>
Var<T> apply(Graph<T>& g, const ParamStore<T>& store, const LayerNormParams& ln, const Var<T>& x) {
  return layer_norm_rows(x, g.parameter(store, ln.gain), g.parameter(store, ln.bias));
}

/// affine -> GELU -> affine
template <typename T>
Var<T> apply(Graph<T>& g, const ParamStore<T>& store, const FeedForwardParams& ffn, const Var<T>& x) {
  return apply(g, store, ffn.outer, gelu(apply(g, store, ffn.inner, x)));
}

/// Multi-head attention with queries from `from` and keys/values from `over`.
template <typename T>
Var<T> apply(Graph<T>& g, const ParamStore<T>& store, const AttentionParams& attn, const Var<T>& from,
             const Var<T>& over, std::size_t heads, Tensor<T>* weights = nullptr) {
  auto q = apply(g, store, attn.query, from);
  auto k = apply(g, store, attn.key, over);
  auto v = apply(g, store, attn.value, over);
  return apply(g, store, attn.output, multi_head_attention(q, k, v, heads, weights));
}

}  // namespace ram
