#include <benchmark/benchmark.h>

#include "ram/trainer.hpp"

namespace {

struct Fixture {
  ram::ModelConfig cfg;
  ram::Lexicon lex;
  std::vector<ram::Story> stories;
  std::vector<bool> candidates;
  std::unique_ptr<ram::RamModel<float>> model;

  Fixture() {
    auto text = ram::generate_task1(16, 3);
    lex = ram::build_vocab(text);
    stories = ram::encode_stories(text, lex, cfg.max_tokens);
    candidates.assign(lex.vocab.size(), true);
    model = std::make_unique<ram::RamModel<float>>(cfg, lex.vocab.size(), lex.answers.token_ids());
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_MemoryStep(benchmark::State& state) {
  auto& f = fixture();
  const auto& seg = f.stories[0].segments[0];
  for (auto _ : state) {
    ram::Graph<float> g;
    auto m = f.model->init_memory(g);
    auto next = f.model->memory_step(g, m, f.model->embed(g, seg));
    benchmark::DoNotOptimize(next.value().data());
  }
}
BENCHMARK(BM_MemoryStep)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  auto& f = fixture();
  std::size_t i = 0;
  for (auto _ : state) {
    ram::Rng rng(i);
    auto r = ram::train_step(*f.model, f.stories[i++ % f.stories.size()], f.candidates, rng);
    benchmark::DoNotOptimize(r.loss.total);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  auto& f = fixture();
  std::size_t i = 0;
  for (auto _ : state) {
    auto p = ram::predict(*f.model, f.stories[i++ % f.stories.size()]);
    benchmark::DoNotOptimize(p.data());
  }
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
