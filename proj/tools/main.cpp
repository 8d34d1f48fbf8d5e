#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "ram/harness.hpp"

namespace fs = std::filesystem;
using namespace ram;

#ifndef RAM_DEFAULT_LEXICON
#define RAM_DEFAULT_LEXICON "lexicon/babi.tsv"
#endif

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string data_dir;
  std::string lexicon;
  std::string tasks = "1";
  std::string out;
  int threads = -1;
  double max_minutes = -1;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("--config", c.config, "JSON model/training config");
  cmd->add_option("--data-dir", c.data_dir, "bAbI directory (falls back to RAM_DATA_DIR)");
  cmd->add_option("--task", c.tasks, "task number, or comma list");
  cmd->add_option("--lexicon", c.lexicon, "part-of-speech lexicon for masking");
  cmd->add_option("--threads", c.threads, "worker threads (0 = all cores)");
  cmd->add_option("--max-minutes", c.max_minutes, "wall-clock cap per training run");
  cmd->add_option("--epochs", c.epochs, "override config epochs");
  cmd->add_option("--seed", c.seed, "override config seed")->each([&](const std::string&) { c.seed_set = true; });
  if (with_out) cmd->add_option("--out", c.out, "output directory");
}

ModelConfig resolve_config(const Common& c) {
  ModelConfig cfg;
  if (!c.config.empty()) {
    if (!fs::exists(c.config)) throw IoError("config not found: " + c.config);
    cfg = load_config(c.config);
  }
  if (c.threads >= 0) cfg.threads = std::size_t(c.threads);
  if (c.max_minutes >= 0) cfg.max_minutes = c.max_minutes;
  if (c.epochs > 0) cfg.epochs = c.epochs;
  if (c.seed_set) cfg.seed = c.seed;
  cfg.validate();
  return cfg;
}

std::optional<fs::path> resolve_data_dir(const Common& c) {
  if (!c.data_dir.empty()) {
    if (!fs::is_directory(c.data_dir)) throw IoError("data directory not found: " + c.data_dir);
    return fs::path(c.data_dir);
  }
  if (const char* env = std::getenv("RAM_DATA_DIR"); env && *env) return fs::path(env);
  return std::nullopt;
}

PosLexicon resolve_lexicon(const Common& c) {
  std::vector<fs::path> tries;
  if (!c.lexicon.empty()) {
    tries.push_back(c.lexicon);
  } else {
    if (const char* env = std::getenv("RAM_LEXICON"); env && *env) tries.push_back(env);
    tries.push_back(RAM_DEFAULT_LEXICON);
    tries.push_back("lexicon/babi.tsv");
  }
  for (const auto& p : tries) {
    if (fs::exists(p)) return load_lexicon(p);
  }
  throw IoError("lexicon not found: " + tries.front().string());
}

std::vector<int> parse_ints(const std::string& list) {
  std::vector<int> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw CLI::ValidationError("expected integers, got '" + item + "'");
    }
    if (used != item.size() || v <= 0) throw CLI::ValidationError("expected positive integers, got '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw CLI::ValidationError("empty list");
  return out;
}

TaskData resolve_tasks(const Common& c, const std::vector<int>& tasks) {
  const auto dir = resolve_data_dir(c);
  std::vector<TaskData> data;
  for (int t : tasks) {
    data.push_back(load_task(dir, t));
    if (data.back().synthetic) {
      std::cerr << "note: no bAbI files for task " << t << "; using a generated replica in the same format\n";
    }
  }
  return merge_tasks(data);
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double acc = 0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / double(v.size() - 1));
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int cmd_train(const Common& c) {
  const auto cfg = resolve_config(c);
  const auto pos = resolve_lexicon(c);
  const auto tasks = parse_ints(c.tasks);
  const fs::path out = c.out.empty() ? fs::path("runs") / "train" : fs::path(c.out);
  std::vector<std::vector<int>> groups;
  if (cfg.scope == TrainingScope::Joint) {
    groups.push_back(tasks);
  } else {
    for (int t : tasks) groups.push_back({t});
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& group : groups) {
    const auto data = resolve_tasks(c, group);
    const fs::path dir = groups.size() == 1 ? out : out / ("task" + std::to_string(group.front()));
    auto r = run_experiment(cfg, data, pos, dir, &std::cerr);
    std::cout << "tasks " << nlohmann::json(group).dump() << ": test error " << std::fixed << std::setprecision(2)
              << r.test_error << "% (best epoch " << r.training.best_epoch << ", val " << r.training.best_val_error
              << "%, " << std::setprecision(0) << r.seconds << " s)" << (data.synthetic ? " [generated data]" : "")
              << "\n";
    summary.push_back({{"tasks", group},
                       {"test_error", r.test_error},
                       {"best_epoch", r.training.best_epoch},
                       {"val_error", r.training.best_val_error},
                       {"epochs_run", r.training.history.size()},
                       {"seconds", r.seconds},
                       {"seed", cfg.seed},
                       {"data", data.source},
                       {"synthetic", data.synthetic},
                       {"checkpoint", (dir / "best.ckpt").string()}});
  }
  write_json(out / "summary.json", summary);
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint);
  const auto bundle = load_bundle(checkpoint);
  const auto data = resolve_tasks(c, parse_ints(c.tasks));
  const auto stories = encode_stories(data.test, bundle.lexicon, bundle.config.max_tokens);
  const double err = evaluate_error(bundle.model, stories, c.threads >= 0 ? std::size_t(c.threads) : 0);
  std::cout << std::fixed << std::setprecision(2) << "test error " << err << "%\n";
  std::cout << nlohmann::json{{"checkpoint", checkpoint}, {"test_error", err}, {"questions", [&] {
                                std::size_t n = 0;
                                for (const auto& s : stories) n += s.questions.size();
                                return n;
                              }()}}
                   .dump()
            << "\n";
  return 0;
}

struct Variant {
  std::string name;
  std::function<void(ModelConfig&)> apply;
};

Variant variant_named(const std::string& name) {
  if (name == "full") return {name, [](ModelConfig&) {}};
  if (name == "no-ssm")
    return {name, [](ModelConfig& c) { c.use_rehearsal = c.use_anticipation = c.use_binary = false; }};
  if (name == "no-rehearsal") return {name, [](ModelConfig& c) { c.use_rehearsal = false; }};
  if (name == "no-anticipation") return {name, [](ModelConfig& c) { c.use_anticipation = false; }};
  if (name == "no-binary") return {name, [](ModelConfig& c) { c.use_binary = false; }};
  if (name == "random-mask") return {name, [](ModelConfig& c) { c.random_mask = true; }};
  throw CLI::ValidationError("unknown variant '" + name + "'");
}

/// Runs every (row, seed) pair and prints a mean/std/best table.
int run_table(const Common& c, const std::string& title, const std::vector<std::pair<std::string, ModelConfig>>& rows,
              std::size_t seeds, const fs::path& out) {
  const auto pos = resolve_lexicon(c);
  const auto data = resolve_tasks(c, parse_ints(c.tasks));
  nlohmann::json table = nlohmann::json::array();
  std::ostringstream text;
  text << title << (data.synthetic ? " [generated data]" : "") << "\n";
  text << std::left << std::setw(18) << "variant" << std::right << std::setw(10) << "mean" << std::setw(10) << "std"
       << std::setw(10) << "best" << "  per-seed\n";
  for (const auto& [name, base] : rows) {
    std::vector<double> errors;
    for (std::size_t s = 0; s < seeds; ++s) {
      ModelConfig cfg = base;
      cfg.seed = base.seed + s;
      std::cerr << title << ": " << name << " seed " << cfg.seed << "\n";
      const auto r = run_experiment(cfg, data, pos, out / name / ("seed" + std::to_string(cfg.seed)), nullptr);
      errors.push_back(r.test_error);
    }
    const double best = *std::min_element(errors.begin(), errors.end());
    text << std::left << std::setw(18) << name << std::right << std::fixed << std::setprecision(2) << std::setw(10)
         << mean(errors) << std::setw(10) << stddev(errors) << std::setw(10) << best << "  ";
    for (double e : errors) text << e << " ";
    text << "\n";
    table.push_back({{"variant", name},
                     {"config", base},
                     {"errors", errors},
                     {"mean", mean(errors)},
                     {"std", stddev(errors)},
                     {"best", best}});
  }
  std::cout << text.str();
  write_json(out / "table.json", {{"title", title}, {"synthetic", data.synthetic}, {"data", data.source}, {"rows", table}});
  std::ofstream(out / "table.txt") << text.str();
  return 0;
}

int cmd_ablate(const Common& c, const std::string& variants, std::size_t seeds) {
  const auto base = resolve_config(c);
  std::vector<std::pair<std::string, ModelConfig>> rows;
  std::vector<std::string> names = {"full"};
  std::stringstream ss(variants);
  for (std::string v; std::getline(ss, v, ',');) {
    if (v != "full") names.push_back(v);
  }
  for (const auto& n : names) {
    ModelConfig cfg = base;
    variant_named(n).apply(cfg);
    rows.emplace_back(n, cfg);
  }
  return run_table(c, "ablation, task " + c.tasks, rows, seeds, c.out.empty() ? "runs/ablate" : c.out);
}

int cmd_sweep(const Common& c, const std::string& slots, std::size_t seeds) {
  const auto base = resolve_config(c);
  std::vector<std::pair<std::string, ModelConfig>> rows;
  for (int k : parse_ints(slots)) {
    ModelConfig cfg = base;
    cfg.slots = std::size_t(k);
    rows.emplace_back("K=" + std::to_string(k), cfg);
  }
  return run_table(c, "memory size sweep, task " + c.tasks, rows, seeds, c.out.empty() ? "runs/sweep" : c.out);
}

int cmd_dump(const Common& c, const std::string& checkpoint, const std::string& story, std::size_t question) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint);
  const auto bundle = load_bundle(checkpoint);
  TextStory chosen;
  if (fs::exists(story)) {
    const auto stories = read_babi_file(story);
    if (stories.empty()) throw IoError("no stories in " + story);
    chosen = stories.front();
  } else {
    std::size_t used = 0;
    std::size_t index = 0;
    try {
      index = std::stoul(story, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != story.size()) throw IoError("story file not found: " + story);
    const auto data = resolve_tasks(c, parse_ints(c.tasks));
    if (index >= data.test.size()) throw CLI::ValidationError("story index beyond the test set");
    chosen = data.test[index];
  }
  const auto trace = trace_attention(bundle, chosen, question);
  const fs::path out = c.out.empty() ? fs::path("attention.jsonl") : fs::path(c.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream file(out);
  if (!file) throw IoError("cannot write " + out.string());
  const auto n = write_trace(file, trace);
  std::cout << "wrote " << n << " records to " << out.string() << " (predicted '" << trace.predicted << "', answer '"
            << trace.answer << "')\n";
  return 0;
}

int cmd_gen(const Common& c, std::size_t train_count, std::size_t test_count) {
  const auto tasks = parse_ints(c.tasks);
  const fs::path out = c.out.empty() ? fs::path("data") / "generated" : fs::path(c.out);
  fs::create_directories(out);
  const std::uint64_t seed = c.seed_set ? c.seed : 7;
  for (int t : tasks) {
    if (t != 1 && t != 2) throw CLI::ValidationError("only tasks 1 and 2 can be generated");
    auto gen = t == 1 ? generate_task1 : generate_task2;
    const std::string stem = t == 1 ? "qa1_single-supporting-fact" : "qa2_two-supporting-facts";
    write_babi_file(out / (stem + "_train.txt"), gen(train_count, seed, 5));
    write_babi_file(out / (stem + "_test.txt"), gen(test_count, seed + 1, 5));
    std::cout << "task " << t << ": " << (out / (stem + "_train.txt")).string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming question answering with a slot memory network"};
  app.require_subcommand(1);
  Common c;
  std::string checkpoint, variants = "no-ssm,no-rehearsal,no-anticipation,random-mask", slots = "10,15,20,25",
                          story = "0";
  std::size_t seeds = 5, question = 0, train_count = 2000, test_count = 200;

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train, c);
  auto* eval = app.add_subcommand("eval", "error rate of a checkpoint on a task's test split");
  add_common(eval, c, false);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  auto* ablate = app.add_subcommand("ablate", "train loss-ablation variants over several seeds");
  add_common(ablate, c);
  ablate->add_option("--variants", variants, "comma list of no-ssm, no-rehearsal, no-anticipation, no-binary, random-mask");
  ablate->add_option("--seeds", seeds, "seeds per variant")->check(CLI::PositiveNumber);
  auto* sweep = app.add_subcommand("sweep-memory", "error versus memory slot count");
  add_common(sweep, c);
  sweep->add_option("--slots", slots, "comma list of slot counts");
  sweep->add_option("--seeds", seeds, "seeds per slot count")->check(CLI::PositiveNumber);
  auto* dump = app.add_subcommand("dump-attention", "write attention weights for one question as JSON lines");
  add_common(dump, c);
  dump->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  dump->add_option("--story", story, "bAbI file (first story) or index into the task's test split");
  dump->add_option("--question", question, "question index within the story");
  auto* gen = app.add_subcommand("gen-data", "write generated task 1/2 corpora in bAbI format");
  add_common(gen, c);
  gen->add_option("--train-stories", train_count)->check(CLI::PositiveNumber);
  gen->add_option("--test-stories", test_count)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*train) return cmd_train(c);
    if (*eval) return cmd_eval(c, checkpoint);
    if (*ablate) return cmd_ablate(c, variants, seeds);
    if (*sweep) return cmd_sweep(c, slots, seeds);
    if (*dump) return cmd_dump(c, checkpoint, story, question);
    if (*gen) return cmd_gen(c, train_count, test_count);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
