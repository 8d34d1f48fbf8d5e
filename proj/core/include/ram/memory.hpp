#pragma once

#include <random>

#include "ram/layers.hpp"

namespace ram {

/// One gate set: candidate z, input gate i (bias shifted by -1) and forget
/// gate f (bias shifted by +1).
struct GateParams {
  Linear candidate, input, forget;
};

/// Slot memory update:
///   fused = M + CA(SA(M), E)
///   gated = gate_a(M, fused)
///   next  = gate_b(gated, FFN(gated))
/// Gate A and gate B are separate parameter sets.
struct MemoryParams {
  std::size_t initial = 0;  // K x d, the step-0 state
  AttentionParams self_attn;
  AttentionParams cross_attn;
  GateParams gate_a;
  FeedForwardParams ffn;
  GateParams gate_b;
  std::size_t heads = 1;
};

inline constexpr double kInputGateShift = -1.0;
inline constexpr double kForgetGateShift = 1.0;

template <typename T>
MemoryParams make_memory(ParamStore<T>& store, std::size_t slots, std::size_t width, std::size_t heads,
                         std::size_t ffn_inner, std::mt19937_64& rng);

template <typename T>
Var<T> init_memory(Graph<T>& g, const ParamStore<T>& store, const MemoryParams& mem);

/// Writes the cross-attention weights (heads x K x N) to `cross_weights` when non-null.
template <typename T>
Var<T> fuse(Graph<T>& g, const ParamStore<T>& store, const MemoryParams& mem, const Var<T>& memory,
            const Var<T>& segment, Tensor<T>* cross_weights = nullptr);

template <typename T>
struct GateOutput {
  Var<T> out;
  Var<T> candidate;
  Var<T> input;
  Var<T> forget;
};

/// out = previous * f + z * i, with z, i, f computed row-wise from `source`.
template <typename T>
GateOutput<T> gate_detailed(Graph<T>& g, const ParamStore<T>& store, const GateParams& gate, const Var<T>& previous,
                            const Var<T>& source);

template <typename T>
Var<T> gate(Graph<T>& g, const ParamStore<T>& store, const GateParams& gate, const Var<T>& previous,
            const Var<T>& source) {
  return gate_detailed(g, store, gate, previous, source).out;
}

template <typename T>
Var<T> memory_step(Graph<T>& g, const ParamStore<T>& store, const MemoryParams& mem, const Var<T>& memory,
                   const Var<T>& segment, Tensor<T>* cross_weights = nullptr);

}  // namespace ram
