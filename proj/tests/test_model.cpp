#include "doctest.h"
#include "ram/model.hpp"
#include "ram/ops.hpp"
#include "reference.hpp"
#include "support.hpp"

using namespace ram;
using testing::random_tensor;

namespace {

// Tiny model with every tensor randomized so no initialization symmetry hides bugs.
RamModel<double> randomized(ModelConfig cfg, std::uint64_t seed = 4) {
  RamModel<double> m(cfg, 20, testing::toy_answers());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < m.params().size(); ++i)
    m.params().value(i) = random_tensor(m.params().value(i).shape(), rng, 0.5);
  return m;
}

void zero(ParamStore<double>& s, const std::string& name) { s.value(s.index_of(name)).fill(0.0); }

}  // namespace

TEST_CASE("encoder") {
  auto cfg = testing::toy_config();
  auto m = randomized(cfg);
  auto& s = m.params();
  const std::size_t ids[] = {3, 7};
  SUBCASE("row n is F[id] + PE[n]") {
    Graph<double> g(false);
    auto e = m.embed(g, ids).value();
    const auto& F = s.value(m.encoder().embedding);
    const auto& PE = s.value(m.encoder().positions);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < cfg.d_model; ++c) CHECK(e.at(n, c) == F.at(ids[n], c) + PE.at(n, c));
  }
  SUBCASE("zero position table gives embedding rows") {
    zero(s, "encoder.positions");
    Graph<double> g(false);
    auto e = m.embed(g, ids).value();
    for (std::size_t c = 0; c < cfg.d_model; ++c) CHECK(e.at(1, c) == s.value(m.encoder().embedding).at(7, c));
  }
  SUBCASE("zero embedding gives the position prefix") {
    zero(s, "encoder.embedding");
    Graph<double> g(false);
    auto e = m.embed(g, ids).value();
    for (std::size_t c = 0; c < cfg.d_model; ++c) CHECK(e.at(1, c) == s.value(m.encoder().positions).at(1, c));
  }
  SUBCASE("contract errors") {
    Graph<double> g(false);
    CHECK_THROWS_AS(m.embed(g, std::span<const std::size_t>()), ContractError);
    const std::size_t bad[] = {20};
    CHECK_THROWS_AS(m.embed(g, bad), ContractError);
    std::vector<std::size_t> longer(cfg.position_table() + 1, 4);
    CHECK_THROWS_AS(m.embed(g, longer), ContractError);
  }
  SUBCASE("hand-computed d=2 case") {
    ParamStore<double> store;
    EncoderParams enc{store.add("F", Tensor<double>::from_rows({{1, 2}, {3, 4}, {5, 6}})),
                      store.add("PE", Tensor<double>::from_rows({{0.5, -0.5}, {0.25, 0.75}}))};
    Graph<double> g(false);
    const std::size_t two[] = {2, 0};
    CHECK(embed_segment(g, store, enc, two).value() == Tensor<double>::from_rows({{5.5, 5.5}, {1.25, 2.75}}));
  }
  CHECK(m.params().index_of("encoder.embedding") == m.encoder().embedding);
}

TEST_CASE("fuse") {
  auto cfg = testing::toy_config();
  SUBCASE("matches the reference") {
    auto m = randomized(cfg);
    std::mt19937_64 rng(1);
    auto seg = random_tensor({4, cfg.d_model}, rng);
    Graph<double> g(false);
    auto mem = m.init_memory(g);
    Tensor<double> w;
    auto out = fuse(g, m.params(), m.memory(), mem, g.constant(seg), &w).value();
    auto expect = ref::fuse(ref::from(mem.value()), ref::from(seg), m.params(), cfg.heads);
    CHECK(ref::max_abs_diff(expect, out) <= 1e-6);
    REQUIRE(w.shape() == Shape{cfg.heads, cfg.slots, 4});
    for (std::size_t r = 0; r < cfg.heads * cfg.slots; ++r) {
      double sum = 0;
      for (std::size_t n = 0; n < 4; ++n) sum += w[r * 4 + n];
      CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
  }
  SUBCASE("zero output projections give the residual identity") {
    auto m = randomized(cfg);
    zero(m.params(), "memory.cross_attn.output.weight");
    zero(m.params(), "memory.cross_attn.output.bias");
    std::mt19937_64 rng(2);
    Graph<double> g(false);
    auto mem = m.init_memory(g);
    CHECK(fuse(g, m.params(), m.memory(), mem, g.constant(random_tensor({3, cfg.d_model}, rng))).value() ==
          mem.value());
  }
  SUBCASE("single slot, single token reads the value projection") {
    ParamStore<double> s;
    std::mt19937_64 rng(3);
    auto mp = make_memory(s, 1, 4, 2, 8, rng);
    Graph<double> g(false);
    auto token = g.constant(random_tensor({1, 4}, rng));
    Tensor<double> w;
    auto out = fuse(g, s, mp, init_memory(g, s, mp), token, &w).value();
    CHECK(w[0] == 1.0);
    CHECK(w[1] == 1.0);
    auto v = apply(g, s, mp.cross_attn.output, apply(g, s, mp.cross_attn.value, token));
    auto expect = add(init_memory(g, s, mp), v).value();
    for (std::size_t c = 0; c < 4; ++c) CHECK(out[c] == doctest::Approx(expect[c]).epsilon(1e-12));
  }
  SUBCASE("K=2, N=2, d=1, h=1 by hand") {
    ParamStore<double> s;
    std::mt19937_64 rng(0);
    auto mp = make_memory(s, 2, 1, 1, 1, rng);
    s.value(mp.initial) = Tensor<double>::from_rows({{1.0}, {-2.0}});
    auto set = [&](const Linear& l, double w, double b) {
      s.value(l.weight) = Tensor<double>::scalar(w);
      s.value(l.bias) = Tensor<double>::from_rows({{b}});
    };
    // self-attention collapses to the identity: value/output weights 1, queries 0 (uniform over slots)
    set(mp.self_attn.query, 0, 0);
    set(mp.self_attn.key, 0, 0);
    set(mp.self_attn.value, 1, 0);
    set(mp.self_attn.output, 0, 0);
    // SA output is then 0 for every slot; CA query = 0 * x + 1, key = 2 * e, value = e, output = 3 * x
    set(mp.cross_attn.query, 0, 1);
    set(mp.cross_attn.key, 2, 0);
    set(mp.cross_attn.value, 1, 0);
    set(mp.cross_attn.output, 3, 0);
    Graph<double> g(false);
    auto e = g.constant(Tensor<double>::from_rows({{0.5}, {1.0}}));
    auto out = fuse(g, s, mp, init_memory(g, s, mp), e).value();
    // scores: q*k = 1.0 and 2.0; weights softmax(1, 2); attended = w0*0.5 + w1*1.0
    const double w0 = 1.0 / (1.0 + std::exp(1.0)), w1 = 1.0 - w0;
    const double attended = w0 * 0.5 + w1 * 1.0;
    CHECK(out.at(0, 0) == doctest::Approx(1.0 + 3 * attended).epsilon(1e-12));
    CHECK(out.at(1, 0) == doctest::Approx(-2.0 + 3 * attended).epsilon(1e-12));
  }
  SUBCASE("empty segment is a contract error") {
    auto m = randomized(cfg);
    Graph<double> g(false);
    CHECK_THROWS_AS(fuse(g, m.params(), m.memory(), m.init_memory(g), g.constant(Tensor<double>(Shape{0, 8}))),
                    std::exception);
  }
}

TEST_CASE("gate") {
  ParamStore<double> s;
  std::mt19937_64 rng(6);
  auto mp = make_memory(s, 3, 4, 2, 8, rng);
  auto set_all = [&](const Linear& l, double w, double b) {
    s.value(l.weight).fill(w);
    s.value(l.bias).fill(b);
  };
  Graph<double> g(false);
  auto prev = g.constant(random_tensor({3, 4}, rng));
  auto source = g.constant(random_tensor({3, 4}, rng));
  SUBCASE("zero parameters give sigma(1) retention") {
    set_all(mp.gate_a.candidate, 0, 0);
    set_all(mp.gate_a.input, 0, 0);
    set_all(mp.gate_a.forget, 0, 0);
    auto out = gate_detailed(g, s, mp.gate_a, prev, source);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(std::abs(out.out.value()[i] - 0.731059 * prev.value()[i]) <= 1e-5);
      CHECK(out.forget.value()[i] == doctest::Approx(0.7310585786));
      CHECK(out.input.value()[i] == doctest::Approx(0.2689414214));
      CHECK(out.candidate.value()[i] == 0.0);
    }
  }
  SUBCASE("pass-through") {
    set_all(mp.gate_a.candidate, 0, 0);
    set_all(mp.gate_a.input, 0, -1e3);
    set_all(mp.gate_a.forget, 0, 1e3);
    CHECK(gate(g, s, mp.gate_a, prev, source).value() == prev.value());
  }
  SUBCASE("overwrite") {
    set_all(mp.gate_a.input, 0, 1e3);
    set_all(mp.gate_a.forget, 0, -1e3);
    auto out = gate(g, s, mp.gate_a, prev, source).value();
    auto z = tanh(apply(g, s, mp.gate_a.candidate, source)).value();
    for (std::size_t i = 0; i < 12; ++i) CHECK(out[i] == doctest::Approx(z[i]).epsilon(1e-12));
  }
  SUBCASE("ranges") {
    auto out = gate_detailed(g, s, mp.gate_b, prev, g.constant(random_tensor({3, 4}, rng, 20.0)));
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(out.forget.value()[i] > 0.0);
      CHECK(out.forget.value()[i] < 1.0);
      CHECK(out.input.value()[i] > 0.0);
      CHECK(out.input.value()[i] < 1.0);
      CHECK(std::abs(out.candidate.value()[i]) < 1.0);
    }
  }
  SUBCASE("gate sets are disjoint") {
    CHECK(mp.gate_a.candidate.weight != mp.gate_b.candidate.weight);
    CHECK(s.name(mp.gate_a.forget.bias) != s.name(mp.gate_b.forget.bias));
  }
}

TEST_CASE("memory_step") {
  auto cfg = testing::toy_config();
  auto m = randomized(cfg);
  std::mt19937_64 rng(12);
  SUBCASE("matches the reference over three steps") {
    Graph<double> g(false);
    auto mem = m.init_memory(g);
    auto expect = ref::from(mem.value());
    for (std::size_t n : {1u, 4u, 6u}) {
      auto seg = random_tensor({n, cfg.d_model}, rng);
      mem = m.memory_step(g, mem, g.constant(seg));
      expect = ref::memory_step(expect, ref::from(seg), m.params(), cfg.heads);
      CHECK(mem.shape() == Shape{cfg.slots, cfg.d_model});
      CHECK(ref::max_abs_diff(expect, mem.value()) <= 1e-6);
    }
  }
  SUBCASE("identity configuration") {
    for (auto* gp : {&m.memory().gate_a, &m.memory().gate_b}) {
      m.params().value(gp->input.weight).fill(0);
      m.params().value(gp->input.bias).fill(-1e3);
      m.params().value(gp->forget.weight).fill(0);
      m.params().value(gp->forget.bias).fill(1e3);
    }
    m.params().value(m.memory().ffn.outer.weight).fill(0);
    m.params().value(m.memory().ffn.outer.bias).fill(0);
    Graph<double> g(false);
    auto mem = m.init_memory(g);
    CHECK(m.memory_step(g, mem, g.constant(random_tensor({3, cfg.d_model}, rng))).value() == mem.value());
  }
  SUBCASE("init_memory is the learnable parameter") {
    Graph<double> g(false);
    CHECK(m.init_memory(g).value() == m.init_memory(g).value());
    CHECK(m.init_memory(g).value() == m.params().value(m.memory().initial));
  }
}

TEST_CASE("long streams stay bounded") {
  ModelConfig cfg;
  cfg.d_model = 32;
  cfg.heads = 4;
  cfg.slots = 8;
  RamModel<float> m(cfg, 40, {10, 11});
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> tok(4, 39), len(1, cfg.max_tokens);
  Tensor<float> state = [&] {
    Graph<float> g(false);
    return m.init_memory(g).value();
  }();
  float peak = 0;
  for (int t = 0; t < 1000; ++t) {
    Graph<float> g(false);
    std::vector<std::size_t> ids(len(rng));
    for (auto& i : ids) i = tok(rng);
    state = m.memory_step(g, g.constant(state), m.embed(g, ids)).value();
    REQUIRE(state.shape() == Shape{8, 32});
    REQUIRE(state.all_finite());
    for (float v : state.values()) peak = std::max(peak, std::abs(v));
  }
  CHECK(peak < 100.0f);
}

TEST_CASE("decoders") {
  auto cfg = testing::toy_config();
  auto m = randomized(cfg);
  std::mt19937_64 rng(21);
  auto q = random_tensor({4, cfg.d_model}, rng);
  auto mem = random_tensor({cfg.slots, cfg.d_model}, rng);
  SUBCASE("one hop matches the reference") {
    auto one = cfg;
    one.hops = 1;
    RamModel<double> m1(one, 20, testing::toy_answers());
    for (std::size_t i = 0; i < m.params().size(); ++i) m1.params().value(i) = m.params().value(i);
    Graph<double> g(false);
    auto out = m1.qa_decode(g, g.constant(q), g.constant(mem)).value();
    CHECK(ref::max_abs_diff(ref::decode_hop(ref::from(q), ref::from(mem), m.params(), "qa_decoder", cfg.heads), out) <=
          1e-6);
    auto rout = m1.ra_decode(g, g.constant(q), g.constant(mem)).value();
    CHECK(ref::max_abs_diff(ref::decode_hop(ref::from(q), ref::from(mem), m.params(), "ra_decoder", cfg.heads),
                            rout) <= 1e-6);
  }
  SUBCASE("three hops reuse one layer") {
    Graph<double> g(false);
    auto expect = ref::from(q);
    for (int h = 0; h < 3; ++h) expect = ref::decode_hop(expect, ref::from(mem), m.params(), "qa_decoder", cfg.heads);
    std::vector<Tensor<double>> weights;
    auto out = m.qa_decode(g, g.constant(q), g.constant(mem), &weights).value();
    CHECK(ref::max_abs_diff(expect, out) <= 1e-6);
    REQUIRE(weights.size() == 3);
    CHECK(weights[0].shape() == Shape{cfg.heads, 4, cfg.slots});
    CHECK(out.shape() == q.shape());
  }
  SUBCASE("zero sublayer outputs give the identity") {
    for (const char* n : {"qa_decoder.self_attn.output", "qa_decoder.cross_attn.output", "qa_decoder.ffn.outer"}) {
      zero(m.params(), std::string(n) + ".weight");
      zero(m.params(), std::string(n) + ".bias");
    }
    Graph<double> g(false);
    CHECK(m.qa_decode(g, g.constant(q), g.constant(mem)).value() == q);
  }
  SUBCASE("empty input is rejected") {
    Graph<double> g(false);
    CHECK_THROWS_AS(m.qa_decode(g, g.constant(Tensor<double>(Shape{0, 8})), g.constant(mem)), std::exception);
  }
  SUBCASE("qa and r/a decoders are disjoint") {
    CHECK(m.qa_decoder().self_attn.query.weight != m.ra_decoder().self_attn.query.weight);
  }
}

TEST_CASE("output heads") {
  auto cfg = testing::toy_config();
  auto m = randomized(cfg);
  std::mt19937_64 rng(31);
  auto h = random_tensor({3, cfg.d_model}, rng);
  const auto& F = m.params().value(m.encoder().embedding);
  SUBCASE("answer logits are pooled dot products with tied rows") {
    Graph<double> g(false);
    auto logits = m.predict_answer(g, g.constant(h)).value();
    REQUIRE(logits.shape() == Shape{1, 5});
    for (std::size_t a = 0; a < 5; ++a) {
      double dot = 0;
      for (std::size_t c = 0; c < cfg.d_model; ++c) dot += (h.at(0, c) + h.at(1, c) + h.at(2, c)) / 3.0 * F.at(10 + a, c);
      CHECK(logits[a] == doctest::Approx(dot).epsilon(1e-12));
    }
    Tensor<double> perm = h;
    for (std::size_t c = 0; c < cfg.d_model; ++c) std::swap(perm.at(0, c), perm.at(2, c));
    auto again = m.predict_answer(g, g.constant(perm)).value();
    for (std::size_t a = 0; a < 5; ++a) CHECK(again[a] == doctest::Approx(logits[a]).epsilon(1e-12));
  }
  SUBCASE("two-class hand-set case") {
    ParamStore<double> s;
    const auto f = s.add("F", Tensor<double>::from_rows({{0, 0}, {1, 2}, {-1, 3}}));
    Graph<double> g(false);
    const std::size_t cls[] = {1, 2};
    auto lg = predict_answer(g, s, f, cls, g.constant(Tensor<double>::from_rows({{1, 1}, {3, -1}}))).value();
    // pooled = (2, 0)
    CHECK(lg == Tensor<double>::from_rows({{2, -2}}));
  }
  SUBCASE("masked token logits") {
    Graph<double> g(false);
    const std::size_t pos[] = {2, 0};
    auto lg = m.masked_token_logits(g, g.constant(h), pos).value();
    REQUIRE(lg.shape() == Shape{2, 20});
    for (std::size_t w = 0; w < 20; ++w) {
      double dot = 0;
      for (std::size_t c = 0; c < cfg.d_model; ++c) dot += h.at(2, c) * F.at(w, c);
      CHECK(lg.at(0, w) == doctest::Approx(dot).epsilon(1e-12));
    }
    Tensor<double> zeros(3, cfg.d_model);
    auto z = softmax_rows(m.masked_token_logits(g, g.constant(zeros), pos)).value();
    CHECK(z.at(1, 7) == doctest::Approx(1.0 / 20));
    const std::size_t bad[] = {3};
    CHECK_THROWS_AS(m.masked_token_logits(g, g.constant(h), bad), ContractError);
  }
  SUBCASE("direction logit reads only the CLS row") {
    Graph<double> g(false);
    const double base = m.direction_logit(g, g.constant(h)).value().item();
    Tensor<double> other = h;
    for (std::size_t c = 0; c < cfg.d_model; ++c) other.at(2, c) += 5.0;
    CHECK(m.direction_logit(g, g.constant(other)).value().item() == base);
    m.params().value(m.direction_head().weight).fill(0);
    Graph<double> fresh(false);
    CHECK(m.direction_logit(fresh, fresh.constant(h)).value().item() == m.params().value(m.direction_head().bias).item());
  }
}

TEST_CASE("gradient reaches M0 and memory parameters through the stream") {
  auto cfg = testing::toy_config();
  auto m = randomized(cfg, 9);
  std::mt19937_64 rng(4);
  std::vector<Tensor<double>> segs;
  for (int i = 0; i < 5; ++i) segs.push_back(random_tensor({3, cfg.d_model}, rng));
  auto q = random_tensor({2, cfg.d_model}, rng);
  auto report = testing::check_gradients(
      m.params(),
      [&](Graph<double>& g, const ParamStore<double>&) {
        Var<double> mem = m.init_memory(g);
        for (const auto& seg : segs) mem = m.memory_step(g, mem, g.constant(seg));
        const std::size_t label[] = {1};
        return cross_entropy(m.predict_answer(g, m.qa_decode(g, g.constant(q), mem)), std::span<const std::size_t>(label));
      },
      1e-5, [](const std::string& name) { return name.rfind("memory.", 0) == 0; });
  INFO("worst " << report.worst << " at " << report.where << " norms " << report.analytic_norm << " " << report.numeric_norm);
  CHECK(report.checked > 0);
  CHECK(report.worst <= 1e-3);
}
