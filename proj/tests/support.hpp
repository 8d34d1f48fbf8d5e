#pragma once
// Finite-difference gradient checking and small fixtures shared by the unit
// tests and the acceptance binary.

#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "ram/data.hpp"
#include "ram/graph.hpp"
#include "ram/model.hpp"
#include "ram/ops.hpp"
#include "ram/trainer.hpp"

namespace testing {

using LossFn = std::function<ram::Var<double>(ram::Graph<double>&, const ram::ParamStore<double>&)>;

struct GradReport {
  double worst = 0.0;     // largest per-tensor relative error
  std::string where;      // parameter holding it
  std::size_t checked = 0;
  double analytic_norm = 0.0;  // of the worst tensor
  double numeric_norm = 0.0;
};

/// Relative error ||a - n|| / max(||a|| + ||n||, 1e-5) per parameter tensor,
/// with n from central differences of step h. The floor keeps tensors whose
/// true gradient is zero from being judged on rounding noise alone.
inline GradReport check_gradients(ram::ParamStore<double>& store, const LossFn& loss, double h = 1e-5,
                                  const std::function<bool(const std::string&)>& include = {}) {
  ram::Gradients<double> analytic;
  {
    ram::Graph<double> g;
    analytic = g.backward(loss(g, store), store.size());
  }
  auto eval = [&] {
    ram::Graph<double> g(false);
    return loss(g, store).value()[0];
  };
  GradReport report;
  for (std::size_t p = 0; p < store.size(); ++p) {
    if (include && !include(store.name(p))) continue;
    auto& values = store.value(p);
    double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      values[i] = keep + h;
      const double up = eval();
      values[i] = keep - h;
      const double down = eval();
      values[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.has(p) ? analytic.get(p)[i] : 0.0;
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      ++report.checked;
    }
    const double rel = std::sqrt(diff2) / std::max(std::sqrt(a2) + std::sqrt(n2), 1e-5);
    if (rel > report.worst) {
      report.worst = rel;
      report.where = store.name(p);
      report.analytic_norm = std::sqrt(a2);
      report.numeric_norm = std::sqrt(n2);
    }
  }
  return report;
}

inline ram::Tensor<double> random_tensor(ram::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  ram::Tensor<double> t(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

/// Checks `build(inputs)` projected onto a fixed random tensor, so every
/// output element contributes with its own weight.
template <typename Build>
GradReport primitive_report(std::vector<ram::Shape> shapes, Build build, std::uint64_t seed = 1) {
  using namespace ram;
  std::mt19937_64 rng(seed);
  ParamStore<double> store;
  for (std::size_t i = 0; i < shapes.size(); ++i) store.add("in" + std::to_string(i), random_tensor(shapes[i], rng));
  auto inputs = [](Graph<double>& g, const ParamStore<double>& s) {
    std::vector<Var<double>> ins;
    for (std::size_t i = 0; i < s.size(); ++i) ins.push_back(g.parameter(s, i));
    return ins;
  };
  Tensor<double> probe;
  {
    Graph<double> g(false);
    probe = random_tensor(build(inputs(g, store)).shape(), rng);
  }
  return check_gradients(store, [&](Graph<double>& g, const ParamStore<double>& s) {
    return sum_all(mul(build(inputs(g, s)), g.constant(probe)));
  });
}

inline std::vector<std::pair<std::string, GradReport>> primitive_gradient_reports() {
  using namespace ram;
  using V = std::vector<Var<double>>;
  std::vector<std::pair<std::string, GradReport>> out;
  auto run = [&](const char* name, std::vector<Shape> shapes, auto build) {
    out.emplace_back(name, primitive_report(std::move(shapes), build));
  };
  run("matmul", {{3, 4}, {4, 2}}, [](const V& v) { return matmul(v[0], v[1]); });
  run("matmul_nt", {{3, 4}, {5, 4}}, [](const V& v) { return matmul_nt(v[0], v[1]); });
  run("add", {{2, 3}, {2, 3}}, [](const V& v) { return add(v[0], v[1]); });
  run("sub", {{2, 3}, {2, 3}}, [](const V& v) { return sub(v[0], v[1]); });
  run("mul", {{2, 3}, {2, 3}}, [](const V& v) { return mul(v[0], v[1]); });
  run("scale", {{2, 3}}, [](const V& v) { return scale(v[0], 1.7); });
  run("add_scalar", {{2, 3}}, [](const V& v) { return add_scalar(v[0], -0.4); });
  run("add_row", {{3, 4}, {1, 4}}, [](const V& v) { return add_row(v[0], v[1]); });
  run("tanh", {{3, 3}}, [](const V& v) { return tanh(v[0]); });
  run("sigmoid", {{3, 3}}, [](const V& v) { return sigmoid(v[0]); });
  run("gelu", {{3, 3}}, [](const V& v) { return gelu(v[0]); });
  run("softmax_rows", {{3, 5}}, [](const V& v) { return softmax_rows(v[0]); });
  run("layer_norm_rows", {{3, 5}, {1, 5}, {1, 5}}, [](const V& v) { return layer_norm_rows(v[0], v[1], v[2]); });
  run("mean_rows", {{4, 3}}, [](const V& v) { return mean_rows(v[0]); });
  run("sum_all", {{4, 3}}, [](const V& v) { return sum_all(v[0]); });
  run("gather_rows", {{5, 3}}, [](const V& v) {
    static const std::size_t ids[] = {4, 0, 4, 2};
    return gather_rows(v[0], std::span<const std::size_t>(ids));
  });
  run("slice_rows", {{5, 3}}, [](const V& v) { return slice_rows(v[0], 1, 3); });
  run("cross_entropy", {{3, 6}}, [](const V& v) {
    static const std::size_t t[] = {5, 0, 2};
    return cross_entropy(v[0], std::span<const std::size_t>(t));
  });
  run("sigmoid_bce", {{1, 1}}, [](const V& v) { return add(sigmoid_bce(v[0], 1.0), sigmoid_bce(v[0], 0.0)); });
  run("attention", {{3, 8}, {4, 8}, {4, 8}}, [](const V& v) { return multi_head_attention(v[0], v[1], v[2], 2); });
  return out;
}

/// d=8, K=3, h=2, vocabulary of 20 with answers at ids 10..14.
inline ram::ModelConfig toy_config() {
  ram::ModelConfig c;
  c.d_model = 8;
  c.slots = 3;
  c.heads = 2;
  c.hops = 3;
  c.max_tokens = 6;
  c.ffn_multiplier = 2;
  c.seed = 11;
  return c;
}

inline std::vector<std::size_t> toy_answers() { return {10, 11, 12, 13, 14}; }

/// Three segments and two questions over a 20-token vocabulary.
inline ram::Story toy_story() {
  ram::Story s;
  s.segments = {{4, 5, 6, 7}, {8, 9, 10}, {5, 15, 16, 11, 17}};
  s.questions = {{{18, 4, 19}, 2, {2}, 2}, {{18, 5}, 1, {3}, 3}};
  return s;
}

/// Full objective of the toy model on the toy story, masks fixed by seed.
inline GradReport end_to_end_report() {
  ram::RamModel<double> m(toy_config(), 20, toy_answers());
  const auto story = toy_story();
  const std::vector<bool> candidates(20, true);
  return check_gradients(m.params(), [&](ram::Graph<double>& g, const ram::ParamStore<double>&) {
    ram::Rng rng(5);
    return ram::story_loss(g, m, story, candidates, rng).total;
  });
}

}  // namespace testing
