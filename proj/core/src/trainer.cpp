#include "ram/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <thread>

#include "ram/ops.hpp"

namespace ram {

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  qa += o.qa;
  rehearsal += o.rehearsal;
  anticipation += o.anticipation;
  binary += o.binary;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double f) const {
  return {qa * f, rehearsal * f, anticipation * f, binary * f, total * f};
}

std::vector<PretextSample> plan_pretext_samples(std::size_t segments, bool rehearsal, bool anticipation, Rng& rng) {
  std::vector<PretextSample> plan;
  for (std::size_t t = 1; t <= segments; ++t) {
    if (rehearsal && t > 1) {
      const auto past = std::uniform_int_distribution<std::size_t>(1, t - 1)(rng);
      plan.push_back({t, past, Direction::Past});
    }
    if (anticipation && t < segments) plan.push_back({t, t + 1, Direction::Future});
  }
  return plan;
}

namespace {

template <typename T>
Var<T> sum_vars(const std::vector<Var<T>>& vars) {
  Var<T> acc = vars.front();
  for (std::size_t i = 1; i < vars.size(); ++i) acc = add(acc, vars[i]);
  return acc;
}

template <typename T>
Var<T> mean_vars(const std::vector<Var<T>>& vars) {
  return scale(sum_vars(vars), T(1) / T(vars.size()));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(a), std::uint32_t(a >> 32),
                    std::uint32_t(b), std::uint32_t(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t(out[0]) << 32) | out[1];
}

}  // namespace

template <typename T>
StoryLoss<T> story_loss(Graph<T>& g, const RamModel<T>& model, const Story& story,
                        const std::vector<bool>& candidate_by_id, Rng& rng) {
  if (story.segments.empty()) throw ContractError("story has no segments");
  if (story.questions.empty()) throw ContractError("story has no questions");
  const ModelConfig& cfg = model.config();
  const std::size_t steps = story.segments.size();
  const auto plan = plan_pretext_samples(steps, cfg.use_rehearsal, cfg.use_anticipation, rng);
  const MaskMode mode = cfg.random_mask ? MaskMode::Random : MaskMode::Coref;

  std::vector<Var<T>> qa_terms, rehearsal_terms, anticipation_terms, binary_terms;
  std::size_t next_sample = 0;
  Var<T> memory = model.init_memory(g);
  for (std::size_t t = 1; t <= steps; ++t) {
    memory = model.memory_step(g, memory, model.embed(g, story.segments[t - 1]));

    for (; next_sample < plan.size() && plan[next_sample].step == t; ++next_sample) {
      const auto& planned = plan[next_sample];
      const auto& segment = story.segments[planned.segment - 1];
      const auto positions = select_mask_positions(segment, candidate_by_id, cfg.mask_ratio, rng, mode);
      const MaskedSample sample = apply_mask(segment, positions, planned.direction);
      const bool has_targets = !sample.target_positions.empty();
      if (!has_targets && !cfg.use_binary) continue;

      auto hidden = model.ra_decode(g, model.embed(g, sample.ids), memory);
      if (has_targets) {
        auto ce = cross_entropy(model.masked_token_logits(g, hidden, sample.target_positions),
                                std::span<const std::size_t>(sample.target_ids));
        (planned.direction == Direction::Past ? rehearsal_terms : anticipation_terms).push_back(ce);
      }
      if (cfg.use_binary) {
        const T label = planned.direction == Direction::Future ? T(1) : T(0);
        binary_terms.push_back(sigmoid_bce(model.direction_logit(g, hidden), label));
      }
    }

    for (const auto& q : story.questions) {
      if (q.position != t) continue;
      auto hidden = model.qa_decode(g, model.embed(g, q.ids), memory);
      const std::size_t label[1] = {q.answer};
      qa_terms.push_back(cross_entropy(model.predict_answer(g, hidden), std::span<const std::size_t>(label)));
    }
  }
  if (qa_terms.size() != story.questions.size()) {
    throw ContractError("a question position lies outside the story's segments");
  }

  StoryLoss<T> out;
  std::vector<Var<T>> parts;
  auto reduce = [&](const std::vector<Var<T>>& terms, double& slot) {
    if (terms.empty()) return;
    auto v = mean_vars(terms);
    slot = double(v.value()[0]);
    parts.push_back(v);
  };
  reduce(qa_terms, out.values.qa);
  reduce(rehearsal_terms, out.values.rehearsal);
  reduce(anticipation_terms, out.values.anticipation);
  reduce(binary_terms, out.values.binary);
  out.total = sum_vars(parts);
  out.values.total = double(out.total.value()[0]);
  out.rehearsal_steps = rehearsal_terms.size();
  out.anticipation_steps = anticipation_terms.size();
  out.direction_samples = binary_terms.size();
  return out;
}

template <typename T>
StepResult<T> train_step(const RamModel<T>& model, const Story& story, const std::vector<bool>& candidate_by_id,
                         Rng& rng) {
  Graph<T> g;
  auto loss = story_loss(g, model, story, candidate_by_id, rng);
  StepResult<T> result;
  result.loss = loss.values;
  result.grads = g.backward(loss.total, model.params().size());
  return result;
}

template StoryLoss<float> story_loss(Graph<float>&, const RamModel<float>&, const Story&, const std::vector<bool>&,
                                     Rng&);
template StoryLoss<double> story_loss(Graph<double>&, const RamModel<double>&, const Story&,
                                      const std::vector<bool>&, Rng&);
template StepResult<float> train_step(const RamModel<float>&, const Story&, const std::vector<bool>&, Rng&);
template StepResult<double> train_step(const RamModel<double>&, const Story&, const std::vector<bool>&, Rng&);

std::vector<std::size_t> predict(const RamModel<float>& model, const Story& story) {
  Graph<float> g(false);
  std::vector<std::size_t> out(story.questions.size(), 0);
  Var<float> memory = model.init_memory(g);
  for (std::size_t t = 1; t <= story.segments.size(); ++t) {
    memory = model.memory_step(g, memory, model.embed(g, story.segments[t - 1]));
    for (std::size_t i = 0; i < story.questions.size(); ++i) {
      const auto& q = story.questions[i];
      if (q.position != t) continue;
      const auto logits = model.predict_answer(g, model.qa_decode(g, model.embed(g, q.ids), memory)).value();
      const auto row = logits.values();
      out[i] = std::size_t(std::max_element(row.begin(), row.end()) - row.begin());
    }
  }
  return out;
}

double error_rate(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size()) throw ContractError("prediction and label counts differ");
  if (labels.empty()) throw ContractError("error rate of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i] ? 1 : 0;
  return 100.0 * (1.0 - double(correct) / double(labels.size()));
}

double evaluate_error(const RamModel<float>& model, const std::vector<Story>& stories, std::size_t threads) {
  std::vector<std::vector<std::size_t>> per_story(stories.size());
  parallel_for(stories.size(), threads, [&](std::size_t, std::size_t i) { per_story[i] = predict(model, stories[i]); });
  std::vector<std::size_t> predicted, labels;
  for (std::size_t i = 0; i < stories.size(); ++i) {
    predicted.insert(predicted.end(), per_story[i].begin(), per_story[i].end());
    for (const auto& q : stories[i].questions) labels.push_back(q.answer);
  }
  return error_rate(predicted, labels);
}

double mrr(const std::vector<std::vector<bool>>& ranked_relevance) {
  if (ranked_relevance.empty()) throw ContractError("mrr of zero queries");
  double total = 0.0;
  for (std::size_t q = 0; q < ranked_relevance.size(); ++q) {
    const auto& list = ranked_relevance[q];
    auto it = std::find(list.begin(), list.end(), true);
    if (it == list.end()) throw ContractError("query " + std::to_string(q) + " has no relevant candidate");
    total += 1.0 / double(it - list.begin() + 1);
  }
  return total / double(ranked_relevance.size());
}

void to_json(nlohmann::json& j, const LossBreakdown& l) {
  j = nlohmann::json{{"qa", l.qa},
                     {"rehearsal", l.rehearsal},
                     {"anticipation", l.anticipation},
                     {"binary", l.binary},
                     {"total", l.total}};
}

void to_json(nlohmann::json& j, const EpochMetrics& m) {
  j = nlohmann::json{{"epoch", m.epoch},
                     {"qa", m.loss.qa},
                     {"rehearsal", m.loss.rehearsal},
                     {"anticipation", m.loss.anticipation},
                     {"binary", m.loss.binary},
                     {"total", m.loss.total},
                     {"val_error", m.val_error},
                     {"seconds", m.seconds},
                     {"updates", m.updates},
                     {"improved", m.improved}};
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(0, i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t begin = n * w / threads, end = n * (w + 1) / threads;
      try {
        for (std::size_t i = begin; i < end; ++i) fn(w, i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::pair<std::vector<Story>, std::vector<Story>> split_validation(const std::vector<Story>& stories,
                                                                   double fraction) {
  if (stories.size() < 2 || fraction <= 0.0) return {stories, {}};
  std::size_t held = std::max<std::size_t>(1, std::size_t(double(stories.size()) * fraction));
  held = std::min(held, stories.size() - 1);
  const auto cut = stories.begin() + std::ptrdiff_t(stories.size() - held);
  return {std::vector<Story>(stories.begin(), cut), std::vector<Story>(cut, stories.end())};
}

TrainResult train(const ModelConfig& config, const Lexicon& lexicon, const std::vector<bool>& candidate_by_id,
                  const std::vector<Story>& train_set, const std::vector<Story>& valid_set,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ContractError("empty training set");
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();

  RamModel<float> model(config, lexicon.vocab.size(), lexicon.answers.token_ids());
  TrainResult result{model, {}, 100.0, 0};
  Adam<float> optimizer(AdamOptions{config.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 shuffle_rng(mix_seed(config.seed, 0x5eed, 0));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  std::size_t threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = std::min(threads, config.batch_size);
  std::size_t updates = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    LossBreakdown epoch_loss;

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::size_t n = end - begin;
      const std::size_t workers = std::min(threads, n);
      std::vector<Gradients<float>> partial(workers, Gradients<float>(model.params().size()));
      std::vector<LossBreakdown> partial_loss(workers);
      parallel_for(n, workers, [&](std::size_t w, std::size_t k) {
        const std::size_t idx = order[begin + k];
        Rng rng(mix_seed(config.seed, epoch, idx));
        auto step = train_step(model, train_set[idx], candidate_by_id, rng);
        partial[w].merge(step.grads);
        partial_loss[w] += step.loss;
      });
      Gradients<float> batch = std::move(partial[0]);
      for (std::size_t w = 1; w < workers; ++w) batch.merge(partial[w]);
      for (const auto& l : partial_loss) epoch_loss += l;
      batch.clip_global_norm(float(config.clip_norm));
      optimizer.step(model.params(), batch);
      ++updates;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = epoch_loss.scaled(1.0 / double(train_set.size()));
    m.val_error = valid_set.empty() ? evaluate_error(model, train_set, threads) : evaluate_error(model, valid_set, threads);
    m.updates = updates;
    m.seconds = std::chrono::duration<double>(clock::now() - epoch_start).count();
    if (result.history.empty() || m.val_error < result.best_val_error) {
      m.improved = true;
      result.best_val_error = m.val_error;
      result.best_epoch = epoch;
      result.best = model;
    }
    result.history.push_back(m);
    if (on_epoch) on_epoch(m, model);

    const double minutes = std::chrono::duration<double>(clock::now() - started).count() / 60.0;
    if (config.max_minutes > 0.0 && minutes >= config.max_minutes) break;
    if (m.val_error == 0.0) break;
  }
  return result;
}

}  // namespace ram
