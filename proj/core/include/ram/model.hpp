#pragma once

#include <span>
#include <vector>

#include "ram/config.hpp"
#include "ram/decoders.hpp"
#include "ram/encoder.hpp"
#include "ram/memory.hpp"

namespace ram {

/// Full parameter set of the streaming QA model: encoder, slot memory, the
/// question-answering decoder and the rehearsal/anticipation decoder with its
/// direction head. The embedding matrix is the only output projection.
template <typename T>
class RamModel {
 public:
  RamModel(const ModelConfig& config, std::size_t vocab_size, std::vector<std::size_t> answer_token_ids);

  const ModelConfig& config() const noexcept { return config_; }
  ParamStore<T>& params() noexcept { return params_; }
  const ParamStore<T>& params() const noexcept { return params_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::span<const std::size_t> answer_token_ids() const noexcept { return answer_token_ids_; }
  std::size_t answer_count() const noexcept { return answer_token_ids_.size(); }

  const EncoderParams& encoder() const noexcept { return encoder_; }
  const MemoryParams& memory() const noexcept { return memory_; }
  const DecoderParams& qa_decoder() const noexcept { return qa_decoder_; }
  const DecoderParams& ra_decoder() const noexcept { return ra_decoder_; }
  const Linear& direction_head() const noexcept { return direction_head_; }

  Var<T> embed(Graph<T>& g, std::span<const std::size_t> ids) const;
  Var<T> init_memory(Graph<T>& g) const;
  Var<T> memory_step(Graph<T>& g, const Var<T>& memory, const Var<T>& segment,
                     Tensor<T>* cross_weights = nullptr) const;
  Var<T> qa_decode(Graph<T>& g, const Var<T>& question, const Var<T>& memory,
                   std::vector<Tensor<T>>* cross_weights = nullptr) const;
  Var<T> ra_decode(Graph<T>& g, const Var<T>& masked, const Var<T>& memory) const;
  Var<T> predict_answer(Graph<T>& g, const Var<T>& hidden) const;
  Var<T> masked_token_logits(Graph<T>& g, const Var<T>& hidden, std::span<const std::size_t> positions) const;
  Var<T> direction_logit(Graph<T>& g, const Var<T>& hidden) const;

  /// Same architecture with parameters converted to another precision.
  template <typename U>
  RamModel<U> cast() const {
    RamModel<U> out(config_, vocab_size_, answer_token_ids_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params().value(i) = params_.value(i).template cast<U>();
    return out;
  }

 private:
  ModelConfig config_;
  std::size_t vocab_size_;
  std::vector<std::size_t> answer_token_ids_;
  ParamStore<T> params_;
  EncoderParams encoder_;
  MemoryParams memory_;
  DecoderParams qa_decoder_;
  DecoderParams ra_decoder_;
  Linear direction_head_;
};

extern template class RamModel<float>;
extern template class RamModel<double>;

}  // namespace ram
