#include "ram/memory.hpp"

namespace ram {

namespace {

template <typename T>
Linear make_gate_linear(ParamStore<T>& store, const std::string& name, std::size_t width, std::mt19937_64& rng) {
  Linear l;
  l.weight = store.add(name + ".weight", init::truncated_normal<T>({width, width}, 0.1, rng));
  l.bias = store.add(name + ".bias", init::truncated_normal<T>({1, width}, 0.1, rng));
  return l;
}

template <typename T>
GateParams make_gate(ParamStore<T>& store, const std::string& name, std::size_t width, std::mt19937_64& rng) {
  GateParams gp;
  gp.candidate = make_gate_linear(store, name + ".candidate", width, rng);
  gp.input = make_gate_linear(store, name + ".input", width, rng);
  gp.forget = make_gate_linear(store, name + ".forget", width, rng);
  return gp;
}

}  // namespace

template <typename T>
MemoryParams make_memory(ParamStore<T>& store, std::size_t slots, std::size_t width, std::size_t heads,
                         std::size_t ffn_inner, std::mt19937_64& rng) {
  if (heads == 0 || width % heads != 0) {
    throw ContractError("memory width " + std::to_string(width) + " not divisible by " + std::to_string(heads) +
                        " heads");
  }
  MemoryParams mem;
  mem.heads = heads;
  mem.initial = store.add("memory.initial", init::normal<T>({slots, width}, 1.0, rng));
  mem.self_attn = make_attention(store, "memory.self_attn", width, rng);
  mem.cross_attn = make_attention(store, "memory.cross_attn", width, rng);
  mem.gate_a = make_gate(store, "memory.gate_a", width, rng);
  mem.ffn = make_feed_forward(store, "memory.ffn", width, ffn_inner, rng);
  mem.gate_b = make_gate(store, "memory.gate_b", width, rng);
  return mem;
}

template <typename T>
Var<T> init_memory(Graph<T>& g, const ParamStore<T>& store, const MemoryParams& mem) {
  return g.parameter(store, mem.initial);
}

template <typename T>
Var<T> fuse(Graph<T>& g, const ParamStore<T>& store, const MemoryParams& mem, const Var<T>& memory,
            const Var<T>& segment, Tensor<T>* cross_weights) {
  if (segment.rows() == 0) throw ContractError("fuse needs at least one segment token");
  if (segment.cols() != memory.cols()) {
    throw DimensionError("fuse: segment width " + std::to_string(segment.cols()) + " vs memory width " +
                         std::to_string(memory.cols()));
  }
  auto slots = apply(g, store, mem.self_attn, memory, memory, mem.heads);
  auto merged = apply(g, store, mem.cross_attn, slots, segment, mem.heads, cross_weights);
  return add(memory, merged);
}

template <typename T>
GateOutput<T> gate_detailed(Graph<T>& g, const ParamStore<T>& store, const GateParams& gp, const Var<T>& previous,
                            const Var<T>& source) {
  if (previous.shape() != source.shape()) {
    throw DimensionError("gate: " + shape_string(previous.shape()) + " vs " + shape_string(source.shape()));
  }
  GateOutput<T> o;
  o.candidate = tanh(apply(g, store, gp.candidate, source));
  o.input = sigmoid(add_scalar(apply(g, store, gp.input, source), T(kInputGateShift)));
  o.forget = sigmoid(add_scalar(apply(g, store, gp.forget, source), T(kForgetGateShift)));
  o.out = add(mul(previous, o.forget), mul(o.candidate, o.input));
  return o;
}

template <typename T>
Var<T> memory_step(Graph<T>& g, const ParamStore<T>& store, const MemoryParams& mem, const Var<T>& memory,
                   const Var<T>& segment, Tensor<T>* cross_weights) {
  auto fused = fuse(g, store, mem, memory, segment, cross_weights);
  auto gated = gate(g, store, mem.gate_a, memory, fused);
  return gate(g, store, mem.gate_b, gated, apply(g, store, mem.ffn, gated));
}

#define RAM_INSTANTIATE_MEMORY(T)                                                                                  \
  template MemoryParams make_memory(ParamStore<T>&, std::size_t, std::size_t, std::size_t, std::size_t,            \
                                    std::mt19937_64&);                                                             \
  template Var<T> init_memory(Graph<T>&, const ParamStore<T>&, const MemoryParams&);                               \
  template Var<T> fuse(Graph<T>&, const ParamStore<T>&, const MemoryParams&, const Var<T>&, const Var<T>&,         \
                       Tensor<T>*);                                                                                \
  template GateOutput<T> gate_detailed(Graph<T>&, const ParamStore<T>&, const GateParams&, const Var<T>&,          \
                                       const Var<T>&);                                                             \
  template Var<T> memory_step(Graph<T>&, const ParamStore<T>&, const MemoryParams&, const Var<T>&, const Var<T>&, \
                              Tensor<T>*);

RAM_INSTANTIATE_MEMORY(float)
RAM_INSTANTIATE_MEMORY(double)

}  // namespace ram
