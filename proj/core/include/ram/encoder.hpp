#pragma once

#include <random>
#include <span>

#include "ram/graph.hpp"

namespace ram {

/// Token embedding F (|V| x d, also the tied output projection) and learnable
/// per-position embeddings PE (table x d). Positions restart at 0 per segment.
struct EncoderParams {
  std::size_t embedding = 0;
  std::size_t positions = 0;
};

template <typename T>
EncoderParams make_encoder(ParamStore<T>& store, std::size_t vocab_size, std::size_t width,
                           std::size_t position_table, std::mt19937_64& rng);

/// Row n = F[ids[n]] + PE[n].
template <typename T>
Var<T> embed_segment(Graph<T>& g, const ParamStore<T>& store, const EncoderParams& enc,
                     std::span<const std::size_t> ids);

/// Questions share the segment path and parameters.
template <typename T>
Var<T> embed_question(Graph<T>& g, const ParamStore<T>& store, const EncoderParams& enc,
                      std::span<const std::size_t> ids) {
  return embed_segment(g, store, enc, ids);
}

}  // namespace ram
