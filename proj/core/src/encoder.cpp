#include "ram/encoder.hpp"

#include "ram/layers.hpp"
#include "ram/ops.hpp"

namespace ram {

template <typename T>
EncoderParams make_encoder(ParamStore<T>& store, std::size_t vocab_size, std::size_t width,
                           std::size_t position_table, std::mt19937_64& rng) {
  EncoderParams enc;
  enc.embedding = store.add("encoder.embedding", init::normal<T>({vocab_size, width}, 0.02, rng));
  enc.positions = store.add("encoder.positions", init::normal<T>({position_table, width}, 0.02, rng));
  return enc;
}

template <typename T>
Var<T> embed_segment(Graph<T>& g, const ParamStore<T>& store, const EncoderParams& enc,
                     std::span<const std::size_t> ids) {
  if (ids.empty()) throw ContractError("cannot embed an empty token sequence");
  const auto& table = store.value(enc.positions);
  if (ids.size() > table.rows()) {
    throw ContractError("sequence of " + std::to_string(ids.size()) + " tokens exceeds the position table (" +
                        std::to_string(table.rows()) + ")");
  }
  const auto& vocab = store.value(enc.embedding);
  for (auto id : ids) {
    if (id >= vocab.rows()) {
      throw ContractError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab.rows()));
    }
  }
  auto tokens = gather_rows(g.parameter(store, enc.embedding), ids);
  auto positions = slice_rows(g.parameter(store, enc.positions), 0, ids.size());
  return add(tokens, positions);
}

template EncoderParams make_encoder(ParamStore<float>&, std::size_t, std::size_t, std::size_t, std::mt19937_64&);
template EncoderParams make_encoder(ParamStore<double>&, std::size_t, std::size_t, std::size_t, std::mt19937_64&);
template Var<float> embed_segment(Graph<float>&, const ParamStore<float>&, const EncoderParams&,
                                  std::span<const std::size_t>);
template Var<double> embed_segment(Graph<double>&, const ParamStore<double>&, const EncoderParams&,
                                   std::span<const std::size_t>);

}  // namespace ram
