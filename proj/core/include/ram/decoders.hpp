#pragma once

#include <random>
#include <span>
#include <vector>

#include "ram/layers.hpp"

namespace ram {

/// Pre-norm transformer decoder layer reused for every hop:
///   x += SA(LN1(x)); x += CA(LN2(x), memory); x += FFN(LN3(x))
struct DecoderParams {
  LayerNormParams norm_self, norm_cross, norm_ffn;
  AttentionParams self_attn;
  AttentionParams cross_attn;
  FeedForwardParams ffn;
  std::size_t heads = 1;
  std::size_t hops = 1;
};

template <typename T>
DecoderParams make_decoder(ParamStore<T>& store, const std::string& name, std::size_t width, std::size_t heads,
                           std::size_t hops, std::size_t ffn_inner, std::mt19937_64& rng);

/// Runs `dec.hops` passes of the shared layer over `tokens` against `memory`.
/// When `cross_weights` is non-null it receives one {heads, N, K} tensor per hop.
template <typename T>
Var<T> decode(Graph<T>& g, const ParamStore<T>& store, const DecoderParams& dec, const Var<T>& tokens,
              const Var<T>& memory, std::vector<Tensor<T>>* cross_weights = nullptr);

/// Global average pooling over rows, then logits against the tied embedding
/// rows of each answer class: 1 x |answers|.
template <typename T>
Var<T> predict_answer(Graph<T>& g, const ParamStore<T>& store, std::size_t embedding,
                      std::span<const std::size_t> answer_token_ids, const Var<T>& hidden);

/// Rows of `hidden` at `positions` projected by F^T: |positions| x |V|.
template <typename T>
Var<T> masked_token_logits(Graph<T>& g, const ParamStore<T>& store, std::size_t embedding, const Var<T>& hidden,
                           std::span<const std::size_t> positions);

/// Affine map of the CLS row (row 0) to one logit; label 0 = past, 1 = future.
template <typename T>
Var<T> direction_logit(Graph<T>& g, const ParamStore<T>& store, const Linear& head, const Var<T>& hidden);

}  // namespace ram
