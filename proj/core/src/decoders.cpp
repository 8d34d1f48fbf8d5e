#include "ram/decoders.hpp"

namespace ram {

template <typename T>
DecoderParams make_decoder(ParamStore<T>& store, const std::string& name, std::size_t width, std::size_t heads,
                           std::size_t hops, std::size_t ffn_inner, std::mt19937_64& rng) {
  if (heads == 0 || width % heads != 0) {
    throw ContractError("decoder width " + std::to_string(width) + " not divisible by " + std::to_string(heads) +
                        " heads");
  }
  if (hops == 0) throw ContractError("decoder needs at least one hop");
  DecoderParams dec;
  dec.heads = heads;
  dec.hops = hops;
  dec.norm_self = make_layer_norm(store, name + ".norm_self", width);
  dec.self_attn = make_attention(store, name + ".self_attn", width, rng);
  dec.norm_cross = make_layer_norm(store, name + ".norm_cross", width);
  dec.cross_attn = make_attention(store, name + ".cross_attn", width, rng);
  dec.norm_ffn = make_layer_norm(store, name + ".norm_ffn", width);
  dec.ffn = make_feed_forward(store, name + ".ffn", width, ffn_inner, rng);
  return dec;
}

template <typename T>
Var<T> decode(Graph<T>& g, const ParamStore<T>& store, const DecoderParams& dec, const Var<T>& tokens,
              const Var<T>& memory, std::vector<Tensor<T>>* cross_weights) {
  if (tokens.rows() == 0) throw ContractError("decoder input is empty");
  // Memory keys and values are identical on every hop, so project them once.
  auto mem_keys = apply(g, store, dec.cross_attn.key, memory);
  auto mem_values = apply(g, store, dec.cross_attn.value, memory);
  if (cross_weights) cross_weights->clear();

  Var<T> x = tokens;
  for (std::size_t hop = 0; hop < dec.hops; ++hop) {
    auto h = apply(g, store, dec.norm_self, x);
    x = add(x, apply(g, store, dec.self_attn, h, h, dec.heads));

    h = apply(g, store, dec.norm_cross, x);
    auto q = apply(g, store, dec.cross_attn.query, h);
    Tensor<T> weights;
    auto attended = multi_head_attention(q, mem_keys, mem_values, dec.heads, cross_weights ? &weights : nullptr);
    x = add(x, apply(g, store, dec.cross_attn.output, attended));
    if (cross_weights) cross_weights->push_back(std::move(weights));

    x = add(x, apply(g, store, dec.ffn, apply(g, store, dec.norm_ffn, x)));
  }
  return x;
}

template <typename T>
Var<T> predict_answer(Graph<T>& g, const ParamStore<T>& store, std::size_t embedding,
                      std::span<const std::size_t> answer_token_ids, const Var<T>& hidden) {
  if (hidden.rows() == 0) throw ContractError("predict_answer on empty states");
  auto pooled = mean_rows(hidden);
  auto classes = gather_rows(g.parameter(store, embedding), answer_token_ids);
  return matmul_nt(pooled, classes);
}

template <typename T>
Var<T> masked_token_logits(Graph<T>& g, const ParamStore<T>& store, std::size_t embedding, const Var<T>& hidden,
                           std::span<const std::size_t> positions) {
  if (positions.empty()) throw ContractError("masked_token_logits needs at least one position");
  // gather_rows doubles as row selection on an arbitrary node.
  for (auto p : positions) {
    if (p >= hidden.rows()) {
      throw ContractError("target position " + std::to_string(p) + " outside " + std::to_string(hidden.rows()) +
                          " rows");
    }
  }
  auto rows = gather_rows(hidden, positions);
  return matmul_nt(rows, g.parameter(store, embedding));
}

template <typename T>
Var<T> direction_logit(Graph<T>& g, const ParamStore<T>& store, const Linear& head, const Var<T>& hidden) {
  return apply(g, store, head, slice_rows(hidden, 0, 1));
}

#define RAM_INSTANTIATE_DECODERS(T)                                                                            \
  template DecoderParams make_decoder(ParamStore<T>&, const std::string&, std::size_t, std::size_t, std::size_t, \
                                      std::size_t, std::mt19937_64&);                                           \
  template Var<T> decode(Graph<T>&, const ParamStore<T>&, const DecoderParams&, const Var<T>&, const Var<T>&,   \
                         std::vector<Tensor<T>>*);                                                              \
  template Var<T> predict_answer(Graph<T>&, const ParamStore<T>&, std::size_t, std::span<const std::size_t>,    \
                                 const Var<T>&);                                                                \
  template Var<T> masked_token_logits(Graph<T>&, const ParamStore<T>&, std::size_t, const Var<T>&,              \
                                      std::span<const std::size_t>);                                            \
  template Var<T> direction_logit(Graph<T>&, const ParamStore<T>&, const Linear&, const Var<T>&);

RAM_INSTANTIATE_DECODERS(float)
RAM_INSTANTIATE_DECODERS(double)

}  // namespace ram
