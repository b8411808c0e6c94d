#include "stgcgrn/gradcheck_suite.hpp"

#include <random>

#include "stgcgrn/graph.hpp"
#include "stgcgrn/ops.hpp"
#include "stgcgrn/trainer.hpp"

namespace stgcgrn::checks {
namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(shape, std::move(v));
}

// Values bounded away from zero so relu/abs stay differentiable under the probe step.
Tensor away_from_zero(const Shape& shape, std::mt19937_64& rng) {
  Tensor t = random_tensor(shape, rng, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& x : t.mutable_values())
    if (sign(rng)) x = -x;
  return t;
}

class Suite {
 public:
  Suite(std::uint64_t seed, double tolerance) : rng_(seed) { opts_.tolerance = tolerance; }

  // Checks d/dx sum(w * f(x)) for a fixed random weighting w.
  void unary(const std::string& name, Tensor x, const std::function<Tensor(const Tensor&)>& f) {
    Tensor probe = f(x);
    Tensor w = random_tensor(probe.shape(), rng_);
    auto loss = [&](const Tensor& in) { return ops::sum(ops::mul(f(in), w)); };
    out_.push_back({name, finite_diff_check(loss, x, opts_)});
  }

  // Checks both operands; the other one is held fixed.
  void binary(const std::string& name, Tensor a, Tensor b, const std::function<Tensor(const Tensor&, const Tensor&)>& f) {
    unary(name + "[lhs]", a, [&](const Tensor& x) { return f(x, b); });
    unary(name + "[rhs]", b, [&](const Tensor& y) { return f(a, y); });
  }

  std::mt19937_64& rng() { return rng_; }
  std::vector<NamedCheck> take() { return std::move(out_); }

 private:
  std::mt19937_64 rng_;
  GradCheckOptions opts_;
  std::vector<NamedCheck> out_;
};

}  // namespace

std::vector<NamedCheck> primitive_suite(std::uint64_t seed, double tolerance) {
  Suite s(seed, tolerance);
  auto& rng = s.rng();
  auto r = [&](const Shape& shape) { return random_tensor(shape, rng); };

  s.binary("matmul", r({3, 4}), r({4, 2}), [](const Tensor& a, const Tensor& b) { return ops::matmul(a, b); });
  s.binary("add", r({3, 4}), r({3, 4}), [](const Tensor& a, const Tensor& b) { return ops::add(a, b); });
  s.binary("add_bias", r({3, 4}), r({4}), [](const Tensor& a, const Tensor& b) { return ops::add(a, b); });
  s.binary("sub", r({2, 3, 2}), r({2, 3, 2}), [](const Tensor& a, const Tensor& b) { return ops::sub(a, b); });
  s.binary("mul", r({3, 4}), r({3, 4}), [](const Tensor& a, const Tensor& b) { return ops::mul(a, b); });
  s.binary("mul_bias", r({3, 4}), r({4}), [](const Tensor& a, const Tensor& b) { return ops::mul(a, b); });
  s.unary("sigmoid", r({3, 4}), [](const Tensor& x) { return ops::sigmoid(ops::affine(x, 3.0)); });
  s.unary("tanh", r({3, 4}), [](const Tensor& x) { return ops::tanh(ops::affine(x, 2.0)); });
  s.unary("relu", away_from_zero({3, 4}, rng), [](const Tensor& x) { return ops::relu(x); });
  s.unary("abs", away_from_zero({3, 4}, rng), [](const Tensor& x) { return ops::abs(x); });
  s.unary("affine", r({5}), [](const Tensor& x) { return ops::affine(x, -1.5, 0.25); });
  s.unary("softmax_rows", r({3, 5}), [](const Tensor& x) { return ops::softmax(ops::affine(x, 2.0), 1); });
  s.unary("softmax_cols", r({3, 5}), [](const Tensor& x) { return ops::softmax(x, 0); });
  s.binary("concat", r({2, 3}), r({2, 2}),
           [](const Tensor& a, const Tensor& b) { return ops::concat({a, b, a}, 1); });
  s.unary("slice", r({4, 3, 2}), [](const Tensor& x) { return ops::slice(x, 1, 1, 3); });
  s.unary("sum", r({3, 4}), [](const Tensor& x) { return ops::sum(ops::mul(x, x)); });
  s.unary("sum_axis", r({3, 4}), [](const Tensor& x) { return ops::sum(x, 0); });
  s.unary("mean", r({3, 4}), [](const Tensor& x) { return ops::mean(ops::mul(x, x)); });
  s.unary("mean_axis", r({3, 4}), [](const Tensor& x) { return ops::mean(x, 1); });
  s.unary("reshape", r({2, 6}), [](const Tensor& x) { return ops::reshape(x, {3, 4}); });
  s.unary("transpose", r({2, 5}), [](const Tensor& x) { return ops::transpose(x); });
  s.binary("scale_rows", r({4, 3}), r({4}), [](const Tensor& a, const Tensor& b) { return ops::scale_rows(a, b); });
  s.binary("propagate", r({3, 3}), r({6, 2}), [](const Tensor& a, const Tensor& x) { return ops::propagate(a, x); });
  return s.take();
}

model::ModelConfig toy_config(std::size_t Q) {
  model::ModelConfig cfg;
  cfg.n_nodes = 4;
  cfg.channels = 1;
  cfg.d_h = 8;
  cfg.d_e = 3;
  cfg.n_head = 2;
  cfg.K = 2;
  cfg.P = 3;
  cfg.Q = Q;
  cfg.S = 1;
  cfg.l_d = Q + 6;
  cfg.l_w = 7 * cfg.l_d;
  return cfg;
}

NamedCheck model_check(const ToyOptions& opts) {
  model::ModelConfig cfg = toy_config(opts.Q);
  cfg.ablation = opts.ablation;
  cfg.order = opts.order;

  data::SynthOptions so;
  so.n_nodes = cfg.n_nodes;
  so.samples_per_day = cfg.l_d;
  so.days = 9;
  so.shift_max = 1.0;
  so.noise = 0.1;
  so.seed = opts.seed;
  auto synth = data::synth_generate(so);
  const auto spec = cfg.dataset_spec();
  const std::size_t t0 = data::first_admissible_t0(spec, cfg.l_d, cfg.l_w);
  auto [norm, series] = data::fit_apply_zscore(synth.series, 0, synth.series.steps());
  const auto s0 = data::make_sample(series, spec, t0);
  const auto s1 = data::make_sample(series, spec, t0 + 1);
  const model::Batch batch = model::make_batch({&s0, &s1});
  const Tensor a_pre = graph::row_normalize(graph::build_predefined(synth.graph)).matrix;

  const auto state = model::ModelState::init(cfg, opts.seed);
  const auto params = state.parameters();
  auto loss = [&] { return train::mae_loss(model::forward(batch, state, cfg, a_pre).predictions, batch.Y); };

  // One probe in every parameter tensor, then random extras.
  std::mt19937_64 rng(opts.seed * 7919 + 13);
  std::vector<ParamProbe> probes;
  for (const auto& p : params) probes.push_back({p, std::uniform_int_distribution<std::size_t>(0, p.numel() - 1)(rng)});
  while (probes.size() < opts.probes) {
    const auto& p = params[std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng)];
    probes.push_back({p, std::uniform_int_distribution<std::size_t>(0, p.numel() - 1)(rng)});
  }
  GradCheckOptions go;
  go.tolerance = opts.tolerance;
  return {"model", finite_diff_check_params(loss, params, probes, go)};
}

}  // namespace stgcgrn::checks
