#pragma once

#include <span>

#include "ram/graph.hpp"

namespace ram {

// Differentiable primitives. All operate on rank-2 values (vectors are 1xN);
// the only broadcast is a 1xN row added to every row (add_row).

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// a * b^T
template <typename T> Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
template <typename T> Var<T> add_scalar(const Var<T>& a, T offset);
template <typename T> Var<T> add_row(const Var<T>& a, const Var<T>& row);

template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> sigmoid(const Var<T>& a);
/// Exact (erf) GELU.
template <typename T> Var<T> gelu(const Var<T>& a);

/// Row-wise softmax with max subtraction.
template <typename T> Var<T> softmax_rows(const Var<T>& a);
template <typename T> Var<T> layer_norm_rows(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5));

/// Mean over rows (global average pooling): m x n -> 1 x n.
template <typename T> Var<T> mean_rows(const Var<T>& a);
template <typename T> Var<T> sum_all(const Var<T>& a);

template <typename T> Var<T> gather_rows(const Var<T>& table, std::span<const std::size_t> ids);
template <typename T> Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t count);

/// Mean token-level cross-entropy of `logits` rows against class `targets`.
template <typename T> Var<T> cross_entropy(const Var<T>& logits, std::span<const std::size_t> targets);
/// Sigmoid cross-entropy of a 1x1 logit against label 0 or 1.
template <typename T> Var<T> sigmoid_bce(const Var<T>& logit, T label);

/// Scaled dot-product attention split into `heads` column groups.
/// q: m x d, k and v: n x d; scores are softmaxed over the n keys.
/// When `weights` is non-null it receives the attention matrix, shape {heads, m, n}.
template <typename T>
Var<T> multi_head_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, std::size_t heads,
                            Tensor<T>* weights = nullptr);

}  // namespace ram
