#include "ram/config.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace ram {

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.epochs = 300;
  c.batch_size = 128;
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(d_model, "d_model");
  positive(slots, "slots");
  positive(heads, "heads");
  positive(hops, "hops");
  positive(max_tokens, "max_tokens");
  positive(ffn_multiplier, "ffn_multiplier");
  positive(epochs, "epochs");
  positive(batch_size, "batch_size");
  if (d_model % heads != 0) throw std::invalid_argument("d_model must be divisible by heads");
  if (!(mask_ratio > 0.0 && mask_ratio <= 1.0)) throw std::invalid_argument("mask_ratio must lie in (0, 1]");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
  if (max_minutes < 0.0) throw std::invalid_argument("max_minutes must be non-negative");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must lie in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_model", c.d_model},
                     {"slots", c.slots},
                     {"heads", c.heads},
                     {"hops", c.hops},
                     {"max_tokens", c.max_tokens},
                     {"ffn_multiplier", c.ffn_multiplier},
                     {"mask_ratio", c.mask_ratio},
                     {"lr", c.lr},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"seed", c.seed},
                     {"use_rehearsal", c.use_rehearsal},
                     {"use_anticipation", c.use_anticipation},
                     {"use_binary", c.use_binary},
                     {"random_mask", c.random_mask},
                     {"scope", c.scope == TrainingScope::Joint ? "joint" : "per-task"},
                     {"clip_norm", c.clip_norm},
                     {"max_minutes", c.max_minutes},
                     {"threads", c.threads},
                     {"validation_fraction", c.validation_fraction}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  static const char* known[] = {"d_model",        "slots",           "heads",        "hops",
                                "max_tokens",     "ffn_multiplier",  "mask_ratio",   "lr",
                                "epochs",         "batch_size",      "seed",         "use_rehearsal",
                                "use_anticipation", "use_binary",    "random_mask",  "scope",
                                "clip_norm",      "max_minutes",     "threads",      "validation_fraction"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw std::invalid_argument("unknown config field '" + key + "'");
    }
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("d_model", c.d_model);
  get("slots", c.slots);
  get("heads", c.heads);
  get("hops", c.hops);
  get("max_tokens", c.max_tokens);
  get("ffn_multiplier", c.ffn_multiplier);
  get("mask_ratio", c.mask_ratio);
  get("lr", c.lr);
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("seed", c.seed);
  get("use_rehearsal", c.use_rehearsal);
  get("use_anticipation", c.use_anticipation);
  get("use_binary", c.use_binary);
  get("random_mask", c.random_mask);
  get("clip_norm", c.clip_norm);
  get("max_minutes", c.max_minutes);
  get("threads", c.threads);
  get("validation_fraction", c.validation_fraction);
  if (j.contains("scope")) {
    const auto scope = j.at("scope").get<std::string>();
    if (scope == "per-task") {
      c.scope = TrainingScope::PerTask;
    } else if (scope == "joint") {
      c.scope = TrainingScope::Joint;
    } else {
      throw std::invalid_argument("scope must be 'per-task' or 'joint'");
    }
  }
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  ModelConfig c = j.get<ModelConfig>();
  c.validate();
  return c;
}

}  // namespace ram
