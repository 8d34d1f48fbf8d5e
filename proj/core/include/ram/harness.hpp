#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ram/checkpoint.hpp"
#include "ram/config.hpp"
#include "ram/data.hpp"
#include "ram/masking.hpp"
#include "ram/model.hpp"
#include "ram/trainer.hpp"

namespace ram {

/// A trained model together with everything needed to reuse it. Stored as a
/// binary checkpoint plus `<checkpoint>.json` holding config, vocabulary,
/// answers and free-form metadata.
struct Bundle {
  ModelConfig config;
  Lexicon lexicon;
  RamModel<float> model;
  nlohmann::json metadata = nlohmann::json::object();
};

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);
void save_bundle(const std::filesystem::path& checkpoint, const ModelConfig& config, const Lexicon& lexicon,
                 const RamModel<float>& model, const nlohmann::json& metadata = nlohmann::json::object());
Bundle load_bundle(const std::filesystem::path& checkpoint);

/// Train/test stories for one task, either read from bAbI files or generated.
struct TaskData {
  std::vector<TextStory> train;
  std::vector<TextStory> test;
  bool synthetic = false;
  std::string source;
};

/// Reads task files from `data_dir` when given and present. Otherwise tasks 1
/// and 2 fall back to generated corpora the size of the 10k set; other tasks
/// without files are an error.
TaskData load_task(const std::optional<std::filesystem::path>& data_dir, int task, std::uint64_t seed = 7);

/// Joins several tasks into one corpus for joint training.
TaskData merge_tasks(const std::vector<TaskData>& tasks);

struct ExperimentResult {
  Lexicon lexicon;
  TrainResult training;
  double test_error = 100.0;
  double seconds = 0.0;
};

/// Builds the vocabulary from the training split, holds out the validation
/// share, trains and reports the best-on-validation model's test error. When
/// `out_dir` is set, writes metrics.jsonl (one object per epoch), last.ckpt
/// after every epoch and best.ckpt whenever validation improves. Progress
/// lines go to `progress` when non-null.
ExperimentResult run_experiment(const ModelConfig& config, const TaskData& data, const PosLexicon& pos,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                std::ostream* progress = nullptr);

/// Attention weights recorded while answering one question.
struct AttentionTrace {
  struct Fuse {
    std::size_t step = 0;
    std::vector<std::string> tokens;
    Tensor<float> weights;  // heads x K x N
  };
  struct Hop {
    std::size_t hop = 0;
    Tensor<float> weights;  // heads x N_q x K
  };
  std::vector<Fuse> steps;
  std::vector<Hop> hops;
  std::vector<std::string> question;
  std::string predicted;
  std::string answer;
};

/// Streams the story up to the question's position and records every fuse
/// and qa cross-attention map. Tokens outside the vocabulary are a contract error.
AttentionTrace trace_attention(const Bundle& bundle, const TextStory& story, std::size_t question);

/// One JSON line per (step, slot, head) and per (hop, token, head). Returns the record count.
std::size_t write_trace(std::ostream& out, const AttentionTrace& trace);

}  // namespace ram
