#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace ram {

enum class TrainingScope { PerTask, Joint };

/// Model and training hyperparameters. Defaults are the desk-scale settings;
/// full_scale() returns the full-size training regime.
struct ModelConfig {
  std::size_t d_model = 128;
  std::size_t slots = 20;
  std::size_t heads = 8;
  std::size_t hops = 3;
  std::size_t max_tokens = 16;
  std::size_t ffn_multiplier = 4;
  double mask_ratio = 0.4;
  double lr = 4e-4;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  bool use_rehearsal = true;
  bool use_anticipation = true;
  bool use_binary = true;
  bool random_mask = false;
  TrainingScope scope = TrainingScope::PerTask;
  double clip_norm = 1.0;
  /// Wall-clock cap on training in minutes; 0 disables it.
  double max_minutes = 0.0;
  /// Worker threads for per-story forward/backward; 0 = hardware concurrency.
  std::size_t threads = 0;
  /// Share of training stories held out for validation.
  double validation_fraction = 0.1;

  static ModelConfig full_scale();

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool any_ssm() const { return use_rehearsal || use_anticipation || use_binary; }
  std::size_t ffn_inner() const { return ffn_multiplier * d_model; }
  /// Position table covers the CLS slot as well.
  std::size_t position_table() const { return max_tokens + 1; }
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

ModelConfig load_config(const std::filesystem::path& path);

}  // namespace ram
