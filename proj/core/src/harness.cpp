#include "ram/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>

namespace ram {

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".json";
  return p;
}

void save_bundle(const std::filesystem::path& checkpoint, const ModelConfig& config, const Lexicon& lexicon,
                 const RamModel<float>& model, const nlohmann::json& metadata) {
  if (checkpoint.has_parent_path()) std::filesystem::create_directories(checkpoint.parent_path());
  std::vector<std::string> answers = lexicon.answers.answers();
  nlohmann::json side{{"config", config},
                      {"vocabulary", lexicon.vocab.tokens()},
                      {"answers", answers},
                      {"metadata", metadata}};
  // Write to temporaries first so a crash never leaves a half-written pair.
  auto tmp = checkpoint;
  tmp += ".tmp";
  save_checkpoint(tmp, model.params());
  const auto side_path = sidecar_path(checkpoint);
  auto side_tmp = side_path;
  side_tmp += ".tmp";
  {
    std::ofstream out(side_tmp);
    if (!out) throw std::runtime_error("cannot write " + side_tmp.string());
    out << side.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + side_tmp.string());
  }
  std::filesystem::rename(tmp, checkpoint);
  std::filesystem::rename(side_tmp, side_path);
}

Bundle load_bundle(const std::filesystem::path& checkpoint) {
  const auto side_path = sidecar_path(checkpoint);
  std::ifstream in(side_path);
  if (!in) throw std::runtime_error("cannot open " + side_path.string());
  nlohmann::json side;
  try {
    in >> side;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(side_path.string() + ": " + e.what());
  }
  ModelConfig config = side.at("config").get<ModelConfig>();
  Lexicon lexicon;
  lexicon.vocab = Vocabulary::from_tokens(side.at("vocabulary").get<std::vector<std::string>>());
  for (const auto& a : side.at("answers").get<std::vector<std::string>>()) {
    if (!lexicon.vocab.contains(a)) throw ContractError("answer '" + a + "' missing from stored vocabulary");
    lexicon.answers.add(a, lexicon.vocab.id_of(a));
  }
  RamModel<float> model(config, lexicon.vocab.size(), lexicon.answers.token_ids());
  try {
    assign_parameters(model.params(), load_checkpoint(checkpoint));
  } catch (const CheckpointError& e) {
    throw CheckpointError(checkpoint.string() + ": " + e.what());
  }
  return Bundle{config, std::move(lexicon), std::move(model), side.value("metadata", nlohmann::json::object())};
}

TaskData load_task(const std::optional<std::filesystem::path>& data_dir, int task, std::uint64_t seed) {
  if (data_dir) {
    const TaskFiles files = find_task_files(*data_dir, task);
    if (!files.train.empty() && !files.test.empty()) {
      return {read_babi_file(files.train), read_babi_file(files.test), false, files.train.parent_path().string()};
    }
  }
  // 2,000 training and 200 test stories of five questions each, as in en-10k.
  if (task == 1) return {generate_task1(2000, seed), generate_task1(200, seed + 1), true, "generated task 1"};
  if (task == 2) return {generate_task2(2000, seed), generate_task2(200, seed + 1), true, "generated task 2"};
  throw std::runtime_error("no files for task " + std::to_string(task) +
                           (data_dir ? " under " + data_dir->string() : std::string(" and no data directory")));
}

TaskData merge_tasks(const std::vector<TaskData>& tasks) {
  TaskData out;
  for (const auto& t : tasks) {
    out.train.insert(out.train.end(), t.train.begin(), t.train.end());
    out.test.insert(out.test.end(), t.test.begin(), t.test.end());
    out.synthetic = out.synthetic || t.synthetic;
    out.source += (out.source.empty() ? "" : " + ") + t.source;
  }
  return out;
}

ExperimentResult run_experiment(const ModelConfig& config, const TaskData& data, const PosLexicon& pos,
                                const std::optional<std::filesystem::path>& out_dir, std::ostream* progress) {
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();
  Lexicon lexicon = build_vocab(data.train);
  const auto candidates = pos.candidate_flags(lexicon.vocab);
  const auto all = encode_stories(data.train, lexicon, config.max_tokens);
  auto [train_set, valid_set] = split_validation(all, config.validation_fraction);
  const auto test_set = encode_stories(data.test, lexicon, config.max_tokens);

  std::ofstream metrics;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    metrics.open(*out_dir / "metrics.jsonl");
    if (!metrics) throw std::runtime_error("cannot write " + (*out_dir / "metrics.jsonl").string());
  }
  auto on_epoch = [&](const EpochMetrics& m, const RamModel<float>& current) {
    nlohmann::json row = m;
    row["seed"] = config.seed;
    if (metrics.is_open()) {
      metrics << row.dump() << '\n';
      metrics.flush();
      const nlohmann::json meta{{"epoch", m.epoch}, {"val_error", m.val_error}, {"seed", config.seed}};
      save_bundle(*out_dir / "last.ckpt", config, lexicon, current, meta);
      if (m.improved) save_bundle(*out_dir / "best.ckpt", config, lexicon, current, meta);
    }
    if (progress) *progress << row.dump() << std::endl;
  };
  ExperimentResult result{lexicon, train(config, lexicon, candidates, train_set, valid_set, on_epoch)};
  result.test_error = evaluate_error(result.training.best, test_set, config.threads);
  result.seconds = std::chrono::duration<double>(clock::now() - started).count();
  if (out_dir) {
    const nlohmann::json meta{{"epoch", result.training.best_epoch},
                              {"val_error", result.training.best_val_error},
                              {"test_error", result.test_error},
                              {"seed", config.seed},
                              {"data", data.source},
                              {"synthetic", data.synthetic}};
    save_bundle(*out_dir / "best.ckpt", config, lexicon, result.training.best, meta);
  }
  return result;
}

namespace {

std::vector<std::size_t> strict_ids(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!vocab.contains(t)) throw ContractError("token '" + t + "' is not in the checkpoint vocabulary");
    ids.push_back(vocab.id_of(t));
  }
  return ids;
}

nlohmann::json row_of(const Tensor<float>& w, std::size_t head, std::size_t row) {
  const std::size_t rows = w.shape()[1], cols = w.shape()[2];
  const auto v = w.values();
  const auto begin = v.begin() + std::ptrdiff_t((head * rows + row) * cols);
  return std::vector<float>(begin, begin + std::ptrdiff_t(cols));
}

}  // namespace

AttentionTrace trace_attention(const Bundle& bundle, const TextStory& story, std::size_t question) {
  if (question >= story.questions.size()) throw ContractError("question index out of range");
  const auto& model = bundle.model;
  if (model.vocab_size() != bundle.lexicon.vocab.size()) throw ContractError("model and vocabulary sizes differ");
  const auto& q = story.questions[question];
  if (q.position == 0 || q.position > story.segments.size()) throw ContractError("question has no preceding segments");

  AttentionTrace trace;
  Graph<float> g(false);
  Var<float> memory = model.init_memory(g);
  for (std::size_t t = 1; t <= q.position; ++t) {
    const auto& tokens = story.segments[t - 1];
    AttentionTrace::Fuse step{t, tokens, {}};
    memory = model.memory_step(g, memory, model.embed(g, strict_ids(bundle.lexicon.vocab, tokens)), &step.weights);
    trace.steps.push_back(std::move(step));
  }
  std::vector<Tensor<float>> hops;
  auto hidden = model.qa_decode(g, model.embed(g, strict_ids(bundle.lexicon.vocab, q.tokens)), memory, &hops);
  for (std::size_t l = 0; l < hops.size(); ++l) trace.hops.push_back({l + 1, std::move(hops[l])});
  const auto logits = model.predict_answer(g, hidden).value().values();
  const auto best = std::size_t(std::max_element(logits.begin(), logits.end()) - logits.begin());
  trace.question = q.tokens;
  trace.predicted = bundle.lexicon.answers.answer_of(best);
  trace.answer = q.answer;
  return trace;
}

std::size_t write_trace(std::ostream& out, const AttentionTrace& trace) {
  std::size_t records = 0;
  for (const auto& s : trace.steps) {
    const std::size_t heads = s.weights.shape()[0], slots = s.weights.shape()[1];
    for (std::size_t k = 0; k < slots; ++k) {
      for (std::size_t h = 0; h < heads; ++h) {
        nlohmann::json r{{"kind", "fuse"}, {"step", s.step}, {"slot", k},
                         {"head", h},      {"columns", s.tokens}, {"weights", row_of(s.weights, h, k)}};
        out << r.dump() << '\n';
        ++records;
      }
    }
  }
  for (const auto& hop : trace.hops) {
    const std::size_t heads = hop.weights.shape()[0], rows = hop.weights.shape()[1], slots = hop.weights.shape()[2];
    std::vector<std::string> columns;
    for (std::size_t k = 0; k < slots; ++k) columns.push_back("slot" + std::to_string(k));
    for (std::size_t n = 0; n < rows; ++n) {
      for (std::size_t h = 0; h < heads; ++h) {
        nlohmann::json r{{"kind", "qa"},
                         {"hop", hop.hop},
                         {"token_index", n},
                         {"token", trace.question.at(n)},
                         {"head", h},
                         {"columns", columns},
                         {"weights", row_of(hop.weights, h, n)},
                         {"predicted", trace.predicted},
                         {"answer", trace.answer}};
        out << r.dump() << '\n';
        ++records;
      }
    }
  }
  if (!out) throw std::runtime_error("failed writing attention trace");
  return records;
}

}  // namespace ram
