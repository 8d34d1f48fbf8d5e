#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ram/adam.hpp"
#include "ram/data.hpp"
#include "ram/masking.hpp"
#include "ram/model.hpp"

namespace ram {

struct LossBreakdown {
  double qa = 0.0;
  double rehearsal = 0.0;
  double anticipation = 0.0;
  double binary = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double factor) const;
};

/// One masked-modeling sample drawn while streaming: at step `step` (1-based,
/// memory already updated with segment `step`), segment `segment` (1-based)
/// is masked and decoded against that memory.
struct PretextSample {
  std::size_t step = 0;
  std::size_t segment = 0;
  Direction direction = Direction::Past;
};

/// Rehearsal draws one uniform earlier segment for every step t > 1;
/// anticipation takes segment t + 1 for every t < T. Disabled tasks draw nothing.
std::vector<PretextSample> plan_pretext_samples(std::size_t segments, bool rehearsal, bool anticipation, Rng& rng);

template <typename T>
struct StoryLoss {
  Var<T> total;
  LossBreakdown values;
  std::size_t rehearsal_steps = 0;
  std::size_t anticipation_steps = 0;
  std::size_t direction_samples = 0;
};

/// Builds the full objective for one story on `g`: mean answer cross-entropy
/// over its questions (each read from the memory at its stream position) plus
/// the enabled pretext losses, each averaged over the steps that produced it.
template <typename T>
StoryLoss<T> story_loss(Graph<T>& g, const RamModel<T>& model, const Story& story,
                        const std::vector<bool>& candidate_by_id, Rng& rng);

template <typename T>
struct StepResult {
  LossBreakdown loss;
  Gradients<T> grads;
};

template <typename T>
StepResult<T> train_step(const RamModel<T>& model, const Story& story, const std::vector<bool>& candidate_by_id,
                         Rng& rng);

/// Predicted answer class for every question of `story`.
std::vector<std::size_t> predict(const RamModel<float>& model, const Story& story);

/// 100 * (1 - correct / total).
double error_rate(std::span<const std::size_t> predicted, std::span<const std::size_t> labels);
double evaluate_error(const RamModel<float>& model, const std::vector<Story>& stories, std::size_t threads = 0);

/// Mean over queries of 1 / (rank of first relevant item); ranks are 1-based.
double mrr(const std::vector<std::vector<bool>>& ranked_relevance);

struct EpochMetrics {
  std::size_t epoch = 0;
  LossBreakdown loss;
  double val_error = 0.0;
  double seconds = 0.0;
  std::size_t updates = 0;
  bool improved = false;
};

void to_json(nlohmann::json& j, const LossBreakdown& l);
void to_json(nlohmann::json& j, const EpochMetrics& m);

struct TrainResult {
  RamModel<float> best;
  std::vector<EpochMetrics> history;
  double best_val_error = 100.0;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&, const RamModel<float>& current)>;

/// Adam over shuffled mini-batches of stories; per-story gradients are
/// summed, clipped by global norm and applied once per batch. The model with
/// the lowest validation error is kept. Deterministic for a fixed seed and
/// thread count.
TrainResult train(const ModelConfig& config, const Lexicon& lexicon, const std::vector<bool>& candidate_by_id,
                  const std::vector<Story>& train_set, const std::vector<Story>& valid_set,
                  const EpochCallback& on_epoch = {});

/// Splits off the trailing `fraction` of stories (at least one) as validation.
std::pair<std::vector<Story>, std::vector<Story>> split_validation(const std::vector<Story>& stories, double fraction);

/// Runs fn(i) for i in [0, n) over `threads` workers (0 = hardware); worker w
/// handles a contiguous block. fn receives (worker, i).
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace ram
