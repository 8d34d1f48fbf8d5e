#include "ram/model.hpp"

#include <random>

namespace ram {

template <typename T>
RamModel<T>::RamModel(const ModelConfig& config, std::size_t vocab_size, std::vector<std::size_t> answer_token_ids)
    : config_(config), vocab_size_(vocab_size), answer_token_ids_(std::move(answer_token_ids)) {
  config_.validate();
  if (answer_token_ids_.empty()) throw ContractError("model needs at least one answer class");
  for (auto id : answer_token_ids_) {
    if (id >= vocab_size_) throw ContractError("answer token id outside vocabulary");
  }
  std::mt19937_64 rng(config_.seed);
  const auto d = config_.d_model;
  encoder_ = make_encoder(params_, vocab_size_, d, config_.position_table(), rng);
  memory_ = make_memory(params_, config_.slots, d, config_.heads, config_.ffn_inner(), rng);
  qa_decoder_ = make_decoder(params_, "qa_decoder", d, config_.heads, config_.hops, config_.ffn_inner(), rng);
  ra_decoder_ = make_decoder(params_, "ra_decoder", d, config_.heads, config_.hops, config_.ffn_inner(), rng);
  direction_head_ = make_linear(params_, "ra_decoder.direction", d, 1, rng);
}

template <typename T>
Var<T> RamModel<T>::embed(Graph<T>& g, std::span<const std::size_t> ids) const {
  return embed_segment(g, params_, encoder_, ids);
}

template <typename T>
Var<T> RamModel<T>::init_memory(Graph<T>& g) const {
  return ram::init_memory(g, params_, memory_);
}

template <typename T>
Var<T> RamModel<T>::memory_step(Graph<T>& g, const Var<T>& memory, const Var<T>& segment,
                                Tensor<T>* cross_weights) const {
  return ram::memory_step(g, params_, memory_, memory, segment, cross_weights);
}

template <typename T>
Var<T> RamModel<T>::qa_decode(Graph<T>& g, const Var<T>& question, const Var<T>& memory,
                              std::vector<Tensor<T>>* cross_weights) const {
  return decode(g, params_, qa_decoder_, question, memory, cross_weights);
}

template <typename T>
Var<T> RamModel<T>::ra_decode(Graph<T>& g, const Var<T>& masked, const Var<T>& memory) const {
  return decode(g, params_, ra_decoder_, masked, memory);
}

template <typename T>
Var<T> RamModel<T>::predict_answer(Graph<T>& g, const Var<T>& hidden) const {
  return ram::predict_answer(g, params_, encoder_.embedding, answer_token_ids_, hidden);
}

template <typename T>
Var<T> RamModel<T>::masked_token_logits(Graph<T>& g, const Var<T>& hidden,
                                        std::span<const std::size_t> positions) const {
  return ram::masked_token_logits(g, params_, encoder_.embedding, hidden, positions);
}

template <typename T>
Var<T> RamModel<T>::direction_logit(Graph<T>& g, const Var<T>& hidden) const {
  return ram::direction_logit(g, params_, direction_head_, hidden);
}

template class RamModel<float>;
template class RamModel<double>;

}  // namespace ram
