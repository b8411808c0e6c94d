#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "stgcgrn/checkpoint.hpp"
#include "stgcgrn/errors.hpp"
#include "stgcgrn/gradcheck_suite.hpp"
#include "stgcgrn/ops.hpp"
#include "stgcgrn/trainer.hpp"

using namespace stgcgrn;
using model::ModelConfig;

namespace {

Tensor rand_tensor(const Shape& shape, std::mt19937_64& rng, double bound = 1.0) {
  std::uniform_real_distribution<double> d(-bound, bound);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = d(rng);
  return Tensor(shape, v);
}

std::vector<double> flat(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

ModelConfig small_config() {
  ModelConfig cfg = checks::toy_config(3);
  cfg.d_h = 6;
  return cfg;
}

// Random batch whose shapes follow cfg.
model::Batch random_batch(const ModelConfig& cfg, std::size_t b, std::mt19937_64& rng) {
  const std::size_t n = cfg.n_nodes, c = cfg.channels, len = cfg.block_len();
  model::Batch batch;
  batch.R = rand_tensor({b, cfg.P, n, c}, rng);
  if (cfg.d_count) batch.D = rand_tensor({b, cfg.d_count, len, n, c}, rng);
  if (cfg.w_count) batch.W = rand_tensor({b, cfg.w_count, len, n, c}, rng);
  batch.Y = rand_tensor({b, cfg.Q, n, c}, rng);
  return batch;
}

Tensor ring_adjacency(std::size_t n) {
  graph::GraphSpec g;
  g.n_nodes = n;
  for (std::size_t i = 0; i < n; ++i) g.edges.push_back({i, (i + 1) % n, 1.0 + 0.1 * static_cast<double>(i)});
  g.kappa = 100.0;
  return graph::row_normalize(graph::build_predefined(g)).matrix;
}

// Rows of node `node` in a [(B*N) x d] tensor.
std::vector<double> node_rows(const Tensor& t, std::size_t n, std::size_t node) {
  std::vector<double> out;
  const std::size_t d = t.dim(1);
  for (std::size_t r = node; r < t.dim(0); r += n)
    for (std::size_t k = 0; k < d; ++k) out.push_back(t.values()[r * d + k]);
  return out;
}

Tensor eye_scaled(std::size_t n, double s) {
  Tensor t = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.mutable_values()[i * n + i] = s;
  return t;
}

}  // namespace

TEST(Model, DefaultStructuralConstants) {
  ModelConfig cfg;
  EXPECT_EQ(cfg.attention_candidates(), 14u);
  EXPECT_EQ(cfg.block_len(), 27u);
  EXPECT_EQ(cfg.L(), 15u);
  EXPECT_EQ(cfg.w_pre, 0.1);
  EXPECT_EQ(cfg.w_adp, 0.9);
  EXPECT_EQ(cfg.n_head, 8u);
  EXPECT_EQ(cfg.S, 3u);
  cfg.ablation.no_window = true;
  EXPECT_EQ(cfg.attention_candidates(), 2u);
  cfg.ablation.no_period = true;
  EXPECT_EQ(cfg.attention_candidates(), 0u);
}

TEST(Model, AblationLabels) {
  EXPECT_EQ(model::Ablation{}.label(), "full");
  auto a = model::Ablation::parse("no_pre+no_adp");
  EXPECT_TRUE(a.no_pre && a.no_adp && !a.no_window);
  EXPECT_EQ(a.label(), "no_pre+no_adp");
  EXPECT_EQ(model::Ablation::parse("no_pre_adp"), a);
  EXPECT_THROW(model::Ablation::parse("no_everything"), ConfigError);
  EXPECT_EQ(model::parse_layer_order("dgc_then_attention"), model::LayerOrder::dgc_then_attention);
}

TEST(Model, GruZeroCase) {
  std::mt19937_64 rng(1);
  auto p = model::GruParams::random(3, 4, rng);
  for (auto t : {p.w_zr, p.b_zr, p.w_c, p.b_c})
    for (auto& x : t.mutable_values()) x = 0.0;
  auto h = model::gru_cell(p, Tensor::zeros({2, 3}), Tensor::zeros({2, 4}));
  for (double x : h.values()) EXPECT_EQ(x, 0.0);
}

TEST(Model, GruStaysBounded) {
  std::mt19937_64 rng(2);
  auto p = model::GruParams::random(3, 5, rng);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = rand_tensor({4, 3}, rng, 10.0);
    auto h = rand_tensor({4, 5}, rng, 3.0);
    auto out = model::gru_cell(p, x, h);
    for (std::size_t i = 0; i < out.numel(); ++i)
      EXPECT_LE(std::abs(out.values()[i]), std::max(std::abs(h.values()[i]), 1.0) + 1e-15);
  }
}

TEST(Model, GruChainGradient) {
  std::mt19937_64 rng(3);
  auto p = model::GruParams::random(2, 4, rng);
  auto xs = rand_tensor({3, 5, 2}, rng);
  auto h0 = rand_tensor({5, 4}, rng, 0.5);
  auto loss = [&] {
    Tensor h = h0;
    for (std::size_t s = 0; s < 3; ++s) h = model::gru_cell(p, ops::reshape(ops::slice(xs, 0, s, s + 1), {5, 2}), h);
    return ops::sum(ops::mul(h, h));
  };
  std::vector<ParamProbe> probes;
  for (auto t : {p.w_zr, p.b_zr, p.w_c, p.b_c})
    for (std::size_t i = 0; i < t.numel(); i += 3) probes.push_back({t, i});
  GradCheckOptions opts;
  opts.tolerance = 1e-5;
  auto r = finite_diff_check_params(loss, {p.w_zr, p.b_zr, p.w_c, p.b_c}, probes, opts);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(Model, EncodeBanks) {
  std::mt19937_64 rng(4);
  auto cfg = small_config();
  auto state = model::ModelState::init(cfg, 1);
  auto batch = random_batch(cfg, 2, rng);
  auto enc = model::encode(state.encoder, state.attention, batch, cfg);
  ASSERT_EQ(enc.banks.size(), 2u);
  EXPECT_EQ(enc.banks[0].size(), cfg.block_len());
  EXPECT_EQ(enc.init_state.shape(), (Shape{2 * cfg.n_nodes, cfg.d_h}));
  auto again = model::encode(state.encoder, state.attention, batch, cfg);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t s = 0; s < cfg.block_len(); ++s) EXPECT_EQ(flat(enc.banks[j][s]), flat(again.banks[j][s]));

  cfg.ablation.no_period = true;
  auto none = model::encode(state.encoder, state.attention, batch, cfg);
  EXPECT_TRUE(none.banks.empty());
  EXPECT_EQ(flat(none.init_state), flat(enc.init_state));
}

TEST(Model, AttentionWithDefaultWindowHas14CandidatesSummingToOne) {
  ModelConfig cfg;
  cfg.n_nodes = 3;
  cfg.d_h = 4;
  std::mt19937_64 rng(5);
  auto state = model::ModelState::init(cfg, 2);
  auto batch = random_batch(cfg, 2, rng);
  auto enc = model::encode(state.encoder, state.attention, batch, cfg);
  auto h = rand_tensor({6, 4}, rng);
  for (std::size_t t = 0; t < cfg.Q; ++t) {
    auto att = model::attention_step(state.attention, h, enc, t, cfg);
    ASSERT_EQ(att.weights.shape(), (Shape{6, 14}));
    for (std::size_t r = 0; r < 6; ++r) {
      double s = 0;
      for (std::size_t m = 0; m < 14; ++m) s += att.weights.at({r, m});
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
  EXPECT_THROW(model::attention_step(state.attention, h, enc, cfg.Q, cfg), std::out_of_range);
}

TEST(Model, IdenticalBanksGiveThatBankAsContext) {
  auto cfg = small_config();
  std::mt19937_64 rng(6);
  auto params = model::AttentionParams::random(cfg.d_h, cfg.d_h, rng);
  const std::size_t rows = 8;
  auto u = rand_tensor({rows, cfg.d_h}, rng);
  model::Encoding enc;
  enc.banks.assign(2, std::vector<Tensor>(cfg.block_len(), u));
  enc.keys.assign(2, std::vector<Tensor>(cfg.block_len(), ops::matmul(u, params.w2)));
  auto h = rand_tensor({rows, cfg.d_h}, rng);
  auto att = model::attention_step(params, h, enc, 1, cfg);
  auto expect = ops::add(h, u);
  for (std::size_t i = 0; i < expect.numel(); ++i) EXPECT_NEAR(att.output.values()[i], expect.values()[i], 1e-12);
}

TEST(Model, PlantedMatchDominatesAttention) {
  auto cfg = small_config();
  cfg.d_h = 2;
  model::AttentionParams p;
  p.w1 = Tensor::zeros({2, 2}, true);
  p.w2 = Tensor({2, 2}, {1, 0, 0, 1}, true);
  p.b = Tensor::zeros({2}, true);
  p.v = Tensor({2, 1}, {10, 0}, true);
  model::Encoding enc;
  const Tensor quiet = Tensor::zeros({1, 2}), loud({1, 2}, {1, 0});
  enc.banks.assign(2, std::vector<Tensor>(cfg.block_len(), quiet));
  enc.keys = enc.banks;
  const std::size_t step = 2, planted = cfg.P + step + 1;  // block 1, offset +1
  enc.banks[1][planted] = loud;
  enc.keys[1][planted] = loud;
  auto att = model::attention_step(p, Tensor::zeros({1, 2}), enc, step, cfg);
  // Candidate order: block-major, then position; block 1, offset +1 is index 3 + 2.
  const double margin = 10 * std::tanh(1.0);
  EXPECT_GE(margin, 5.0);
  EXPECT_GT(att.weights.at({0, 5}), 0.9);
}

TEST(Model, IdentityPropagationReturnsInput) {
  ModelConfig cfg = small_config();
  cfg.K = 1;
  cfg.d_h = 4;
  cfg.ablation.no_adp = true;
  std::mt19937_64 rng(7);
  model::GraphContext ctx;
  ctx.use_adp = false;
  ctx.pre_powers = {Tensor::eye(cfg.n_nodes)};
  auto stack = ops::concat({eye_scaled(4, 0.5), eye_scaled(4, 0.5)}, 0);
  auto x = rand_tensor({2 * cfg.n_nodes, 4}, rng);
  auto y = model::double_graph_conv(ctx, x, stack, Tensor{}, cfg);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y.values()[i], x.values()[i], 1e-15);
}

TEST(Model, OneHopSwapsTwoNodes) {
  ModelConfig cfg = small_config();
  cfg.n_nodes = 2;
  cfg.K = 1;
  cfg.ablation.no_adp = true;
  model::GraphContext ctx;
  ctx.use_adp = false;
  ctx.pre_powers = {Tensor({2, 2}, {0, 1, 1, 0})};
  auto stack = ops::concat({Tensor::zeros({2, 2}), Tensor::eye(2)}, 0);
  auto y = model::double_graph_conv(ctx, Tensor::eye(2), stack, Tensor{}, cfg);
  EXPECT_EQ(flat(y), (std::vector<double>{0, 1, 1, 0}));
}

TEST(Model, HeadMeanMatchesSingleHeadWhenHeadsAgree) {
  ModelConfig one = small_config(), two = small_config();
  one.n_head = 1;
  two.n_head = 2;
  std::mt19937_64 rng(8);
  auto emb1 = graph::NodeEmbeddings::random(one.n_nodes, 1, one.d_e, rng);
  std::vector<double> e1, e2;
  for (std::size_t i = 0; i < one.n_nodes; ++i)
    for (int h = 0; h < 2; ++h)
      for (std::size_t k = 0; k < one.d_e; ++k) {
        e1.push_back(emb1.e1.values()[i * one.d_e + k]);
        e2.push_back(emb1.e2.values()[i * one.d_e + k]);
      }
  graph::NodeEmbeddings emb2{Tensor({one.n_nodes, 2, one.d_e}, e1), Tensor({one.n_nodes, 2, one.d_e}, e2)};
  auto a_pre = ring_adjacency(one.n_nodes);
  auto c1 = model::make_graph_context(a_pre, emb1, one);
  auto c2 = model::make_graph_context(a_pre, emb2, two);
  const std::size_t d_in = 3;
  auto x = rand_tensor({2 * one.n_nodes, d_in}, rng);
  auto stack = rand_tensor({(one.K + 1) * d_in, 5}, rng);
  one.ablation.no_pre = two.ablation.no_pre = true;
  c1.use_pre = c2.use_pre = false;
  auto o1 = model::double_graph_conv(c1, x, Tensor{}, stack, one);
  auto o2 = model::double_graph_conv(c2, x, Tensor{}, stack, two);
  for (std::size_t i = 0; i < o1.numel(); ++i) EXPECT_NEAR(o1.values()[i], o2.values()[i], 1e-12);
}

TEST(Model, HeadAveragedPowersEqualAveragedHeadOutputs) {
  ModelConfig cfg = small_config();
  cfg.n_head = 3;
  cfg.K = 2;
  std::mt19937_64 rng(9);
  auto emb = graph::NodeEmbeddings::random(cfg.n_nodes, 3, cfg.d_e, rng);
  for (auto& v : emb.e1.mutable_values()) v *= 3;
  cfg.ablation.no_pre = true;
  auto ctx = model::make_graph_context(Tensor{}, emb, cfg);
  const std::size_t d_in = 2;
  auto x = rand_tensor({2 * cfg.n_nodes, d_in}, rng);
  auto stack = rand_tensor({3 * d_in, 4}, rng);
  auto fused = model::double_graph_conv(ctx, x, Tensor{}, stack, cfg);

  // Per-head route: o_h = sum_k (A_h^k x) W^k, then average over heads.
  Tensor total;
  for (std::size_t h = 0; h < 3; ++h) {
    auto a = graph::adaptive_adjacency(emb, h).matrix;
    auto s1 = ops::propagate(a, x), s2 = ops::propagate(a, s1);
    auto o = ops::matmul(ops::concat({x, s1, s2}, 1), stack);
    total = total.defined() ? ops::add(total, o) : o;
  }
  auto naive = ops::affine(total, 1.0 / 3.0);
  for (std::size_t i = 0; i < naive.numel(); ++i) EXPECT_NEAR(fused.values()[i], naive.values()[i], 1e-12);
}

TEST(Model, FusionWeightsScaleLinearly) {
  ModelConfig cfg = small_config();
  std::mt19937_64 rng(10);
  auto emb = graph::NodeEmbeddings::random(cfg.n_nodes, cfg.n_head, cfg.d_e, rng);
  auto ctx = model::make_graph_context(ring_adjacency(cfg.n_nodes), emb, cfg);
  auto x = rand_tensor({cfg.n_nodes, 3}, rng);
  auto pre = rand_tensor({9, 4}, rng), adp = rand_tensor({9, 4}, rng);
  auto base = model::double_graph_conv(ctx, x, pre, adp, cfg);
  ModelConfig twice = cfg;
  twice.w_pre *= 2;
  twice.w_adp *= 2;
  auto doubled = model::double_graph_conv(ctx, x, pre, adp, twice);
  for (std::size_t i = 0; i < base.numel(); ++i) EXPECT_EQ(doubled.values()[i], 2 * base.values()[i]);
}

TEST(Model, DgcgruZeroParamsStayAtZero) {
  ModelConfig cfg = small_config();
  cfg.ablation.no_pre = cfg.ablation.no_adp = true;
  std::mt19937_64 rng(11);
  auto p = model::DgcgruParams::random(cfg.d_h, cfg.K, rng);
  for (auto t : {p.zr.pre, p.zr.adp, p.zr.bias, p.cand.pre, p.cand.adp, p.cand.bias})
    for (auto& v : t.mutable_values()) v = 0.0;
  auto ctx = model::make_graph_context(Tensor{}, {}, cfg);
  auto h = model::dgcgru_cell(p, ctx, rand_tensor({cfg.n_nodes, cfg.d_h}, rng), Tensor::zeros({cfg.n_nodes, cfg.d_h}), cfg);
  for (double v : h.values()) EXPECT_EQ(v, 0.0);
}

TEST(Model, DgcgruTwoStepGradient) {
  ModelConfig cfg = small_config();
  cfg.n_nodes = 3;
  cfg.d_h = 4;
  std::mt19937_64 rng(12);
  auto p = model::DgcgruParams::random(cfg.d_h, cfg.K, rng);
  auto emb = graph::NodeEmbeddings::random(3, cfg.n_head, cfg.d_e, rng);
  for (auto e : {emb.e1, emb.e2}) e.set_requires_grad(true);
  auto a_pre = ring_adjacency(3);
  auto x0 = rand_tensor({3, 4}, rng), x1 = rand_tensor({3, 4}, rng);
  std::vector<Tensor> params{p.zr.pre, p.zr.adp, p.zr.bias, p.cand.pre, p.cand.adp, p.cand.bias, emb.e1, emb.e2};
  auto loss = [&] {
    auto ctx = model::make_graph_context(a_pre, emb, cfg);
    auto h = model::dgcgru_cell(p, ctx, x0, Tensor::zeros({3, 4}), cfg);
    h = model::dgcgru_cell(p, ctx, x1, h, cfg);
    return ops::sum(ops::mul(h, h));
  };
  std::vector<ParamProbe> probes;
  for (const auto& t : params)
    for (std::size_t i = 0; i < t.numel(); i += 1 + t.numel() / 6) probes.push_back({t, i});
  GradCheckOptions opts;
  opts.tolerance = 1e-5;
  auto r = finite_diff_check_params(loss, params, probes, opts);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(Model, DgcgruIsolatesNodesOnIdentityGraph) {
  ModelConfig cfg = small_config();
  cfg.ablation.no_adp = true;
  std::mt19937_64 rng(13);
  auto p = model::DgcgruParams::random(cfg.d_h, cfg.K, rng);
  auto ctx = model::make_graph_context(Tensor::eye(cfg.n_nodes), {}, cfg);
  auto x = rand_tensor({cfg.n_nodes, cfg.d_h}, rng), h = rand_tensor({cfg.n_nodes, cfg.d_h}, rng, 0.5);
  auto base = model::dgcgru_cell(p, ctx, x, h, cfg);
  auto moved = x.clone();
  for (std::size_t k = 0; k < cfg.d_h; ++k) moved.mutable_values()[2 * cfg.d_h + k] += 1.0;
  auto out = model::dgcgru_cell(p, ctx, moved, h, cfg);
  for (std::size_t i = 0; i < cfg.n_nodes; ++i)
    if (i != 2) {
      EXPECT_EQ(node_rows(base, cfg.n_nodes, i), node_rows(out, cfg.n_nodes, i));
    }
  EXPECT_NE(node_rows(base, cfg.n_nodes, 2), node_rows(out, cfg.n_nodes, 2));
}

TEST(Model, ForwardShapeForEveryVariant) {
  std::mt19937_64 rng(14);
  for (const char* ab : {"full", "no_pre", "no_adp", "no_pre+no_adp", "no_window", "no_period"})
    for (auto order : {model::LayerOrder::attention_then_dgc, model::LayerOrder::dgc_then_attention}) {
      auto cfg = small_config();
      cfg.ablation = model::Ablation::parse(ab);
      cfg.order = order;
      auto state = model::ModelState::init(cfg, 3);
      auto batch = random_batch(cfg, 3, rng);
      auto trace = model::forward(batch, state, cfg, ring_adjacency(cfg.n_nodes));
      EXPECT_EQ(trace.predictions.shape(), (Shape{3, cfg.Q, cfg.n_nodes, 1})) << ab;
      for (double v : trace.predictions.values()) EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(Model, NoPeriodIgnoresPeriodicSegments) {
  auto cfg = small_config();
  cfg.ablation.no_period = true;
  std::mt19937_64 rng(15);
  auto state = model::ModelState::init(cfg, 4);
  auto batch = random_batch(cfg, 2, rng);
  auto a = model::forward(batch, state, cfg, ring_adjacency(cfg.n_nodes)).predictions;
  batch.D = rand_tensor(batch.D.shape(), rng, 50.0);
  batch.W = rand_tensor(batch.W.shape(), rng, 50.0);
  auto b = model::forward(batch, state, cfg, ring_adjacency(cfg.n_nodes)).predictions;
  EXPECT_EQ(flat(a), flat(b));
}

TEST(Model, IsolationWithoutPeriodOrGraph) {
  auto cfg = small_config();
  cfg.ablation = model::Ablation::parse("no_pre+no_adp+no_period");
  std::mt19937_64 rng(16);
  auto state = model::ModelState::init(cfg, 5);
  auto batch = random_batch(cfg, 2, rng);
  const auto a_pre = ring_adjacency(cfg.n_nodes);
  auto base = model::forward(batch, state, cfg, a_pre).predictions;
  for (std::size_t j = 0; j < cfg.n_nodes; ++j) {
    auto moved = batch;
    moved.R = batch.R.clone();
    auto v = moved.R.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i)
      if ((i / cfg.channels) % cfg.n_nodes == j) v[i] += 0.7;
    auto out = model::forward(moved, state, cfg, a_pre).predictions;
    double other = 0.0, own = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) {
      const double diff = std::abs(out.values()[i] - base.values()[i]);
      double& slot = (i / cfg.channels) % cfg.n_nodes == j ? own : other;
      slot = std::max(slot, diff);
    }
    EXPECT_EQ(other, 0.0) << "node " << j;
    EXPECT_GT(own, 0.0) << "node " << j;
  }
}

TEST(Model, AttentionOutputIsPerNodeBeforeGraphLayer) {
  auto cfg = small_config();
  std::mt19937_64 rng(17);
  auto state = model::ModelState::init(cfg, 6);
  auto batch = random_batch(cfg, 2, rng);
  const auto a_pre = ring_adjacency(cfg.n_nodes);
  auto base = model::forward(batch, state, cfg, a_pre, true);
  auto moved = batch;
  const std::size_t j = 1;
  for (Tensor* t : {&moved.R, &moved.D, &moved.W}) {
    *t = t->clone();
    auto v = t->mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (i % cfg.n_nodes == j) v[i] = 0.0;
  }
  auto out = model::forward(moved, state, cfg, a_pre, true);
  for (std::size_t t = 0; t < cfg.Q; ++t)
    for (std::size_t i = 0; i < cfg.n_nodes; ++i)
      if (i != j) {
        EXPECT_EQ(node_rows(base.attention_output[t], cfg.n_nodes, i), node_rows(out.attention_output[t], cfg.n_nodes, i));
      }
}

TEST(Model, FullModelGradientAcrossHorizons) {
  for (std::size_t q : {1, 3, 12}) {
    checks::ToyOptions opts;
    opts.Q = q;
    opts.probes = 24;
    auto r = checks::model_check(opts).report;
    EXPECT_TRUE(r.passed) << "Q=" << q << " rel " << r.max_rel_error;
    EXPECT_GE(r.checked, 20u);
  }
}

TEST(Model, FullModelGradientForVariants) {
  for (const char* ab : {"no_pre", "no_adp", "no_pre+no_adp", "no_window", "no_period"}) {
    checks::ToyOptions opts;
    opts.ablation = model::Ablation::parse(ab);
    auto r = checks::model_check(opts).report;
    EXPECT_TRUE(r.passed) << ab << " rel " << r.max_rel_error;
  }
  checks::ToyOptions rev;
  rev.order = model::LayerOrder::dgc_then_attention;
  EXPECT_TRUE(checks::model_check(rev).report.passed);
}

TEST(Model, CheckpointRoundTripAndShapeMismatch) {
  auto cfg = small_config();
  auto state = model::ModelState::init(cfg, 9);
  const auto path = std::filesystem::temp_directory_path() / "stgcgrn_ckpt_test.bin";
  checkpoint::save(path, state);
  auto other = model::ModelState::init(cfg, 10);
  checkpoint::load(path, other);
  auto a = state.named_parameters(), b = other.named_parameters();
  ASSERT_EQ(a.size(), 22u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_EQ(flat(a[i].second), flat(b[i].second));
  }
  auto bigger = cfg;
  bigger.d_h = 7;
  auto mismatched = model::ModelState::init(bigger, 1);
  EXPECT_THROW(checkpoint::load(path, mismatched), ShapeError);
  std::filesystem::remove(path);
}

TEST(Model, InitIsSeeded) {
  auto cfg = small_config();
  auto a = model::ModelState::init(cfg, 3), b = model::ModelState::init(cfg, 3), c = model::ModelState::init(cfg, 4);
  EXPECT_EQ(flat(a.encoder.w_zr), flat(b.encoder.w_zr));
  EXPECT_NE(flat(a.encoder.w_zr), flat(c.encoder.w_zr));
  for (const auto& p : a.parameters()) EXPECT_TRUE(p.requires_grad());
}
