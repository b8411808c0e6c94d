#include "stgcgrn/data.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>

#include "stgcgrn/errors.hpp"
#include "stgcgrn/tensor_io.hpp"

namespace stgcgrn::data {
namespace {

// Copies data[begin, begin + len) along time into dst.
void copy_steps(const SignalSeries& s, std::size_t begin, std::size_t len, double* dst) {
  const std::size_t frame = s.nodes() * s.channels();
  const double* src = s.data.values().data() + begin * frame;
  std::copy_n(src, len * frame, dst);
}

Tensor periodic_blocks(const SignalSeries& s, const DatasetSpec& spec, std::size_t t0, std::size_t count,
                       std::size_t period) {
  const std::size_t frame = s.nodes() * s.channels();
  const std::size_t len = spec.block_len();
  std::vector<double> v(count * len * frame);
  for (std::size_t b = 0; b < count; ++b) {
    const std::size_t back = count - b;  // most distant first
    copy_steps(s, t0 - spec.P - back * period, len, v.data() + b * len * frame);
  }
  return Tensor({count, len, s.nodes(), s.channels()}, std::move(v));
}

}  // namespace

void validate(const DatasetSpec& spec) {
  if (spec.P == 0) throw ConfigError("data.P must be positive");
  if (spec.Q == 0) throw ConfigError("data.Q must be positive");
  if ((spec.d_count > 0 || spec.w_count > 0) && spec.S > spec.P)
    throw ConfigError("data.S must not exceed data.P");
  const auto& r = spec.split;
  if (r.train <= 0 || r.val < 0 || r.test < 0 || std::fabs(r.train + r.val + r.test - 1.0) > 1e-9)
    throw ConfigError("data.split must be nonnegative ratios summing to 1");
}

void validate(const SignalSeries& series) {
  if (series.data.rank() != 3) throw DataError("series must be [T x N x C], got " + shape_str(series.data.shape()));
  if (series.samples_per_day == 0) throw ConfigError("data.samples_per_day must be positive");
  if (series.samples_per_week != 7 * series.samples_per_day)
    throw ConfigError("data.samples_per_week must equal 7 * samples_per_day");
}

Tensor Normalizer::apply(const Tensor& x) const {
  const std::size_t c = mean.size();
  if (x.shape().back() != c) throw ShapeError("normalizer: channel axis mismatch for " + shape_str(x.shape()));
  Tensor out = x.clone();
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - mean[i % c]) / std[i % c];
  return out;
}

Tensor Normalizer::inverse(const Tensor& x) const {
  const std::size_t c = mean.size();
  if (x.shape().back() != c) throw ShapeError("normalizer: channel axis mismatch for " + shape_str(x.shape()));
  Tensor out = x.clone();
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] * std[i % c] + mean[i % c];
  return out;
}

SignalSeries load_series(const std::filesystem::path& path, std::size_t samples_per_day,
                         std::size_t samples_per_week) {
  SignalSeries s{io::load_tensor(path), samples_per_day, samples_per_week};
  validate(s);
  return s;
}

void save_series(const std::filesystem::path& path, const SignalSeries& series) {
  io::save_tensor(path, series.data);
}

std::pair<Normalizer, SignalSeries> fit_apply_zscore(const SignalSeries& series, std::size_t begin,
                                                     std::size_t end) {
  if (begin >= end || end > series.steps()) throw std::invalid_argument("fit_apply_zscore: empty training range");
  const std::size_t c = series.channels();
  const std::size_t frame = series.nodes() * c;
  auto v = series.data.values();
  Normalizer norm;
  norm.mean.assign(c, 0.0);
  norm.std.assign(c, 0.0);
  const double count = static_cast<double>((end - begin) * series.nodes());
  for (std::size_t i = begin * frame; i < end * frame; ++i) norm.mean[i % c] += v[i];
  for (auto& m : norm.mean) m /= count;
  for (std::size_t i = begin * frame; i < end * frame; ++i) {
    const double d = v[i] - norm.mean[i % c];
    norm.std[i % c] += d * d;
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    norm.std[ch] = std::sqrt(norm.std[ch] / count);
    if (norm.std[ch] < Normalizer::kStdFloor) {
      std::clog << "warning: channel " << ch << " has zero variance on the training range; std floored to "
                << Normalizer::kStdFloor << '\n';
      norm.std[ch] = Normalizer::kStdFloor;
    }
  }
  SignalSeries out{norm.apply(series.data), series.samples_per_day, series.samples_per_week};
  return {std::move(norm), std::move(out)};
}

std::size_t first_admissible_t0(const DatasetSpec& spec, std::size_t samples_per_day,
                                std::size_t samples_per_week) {
  return spec.P + std::max(spec.d_count * samples_per_day, spec.w_count * samples_per_week);
}

std::size_t min_series_length(const DatasetSpec& spec, std::size_t samples_per_day, std::size_t samples_per_week) {
  return first_admissible_t0(spec, samples_per_day, samples_per_week) + spec.Q;
}

OriginSplits split_origins(const SignalSeries& series, const DatasetSpec& spec) {
  validate(spec);
  validate(series);
  const std::size_t ld = series.samples_per_day, lw = series.samples_per_week;
  if (spec.d_count > 0 && ld <= spec.L())
    throw ConfigError("samples_per_day (" + std::to_string(ld) + ") must exceed L = Q + S (" +
                      std::to_string(spec.L()) + ") so daily blocks stay in the past");
  const std::size_t need = min_series_length(spec, ld, lw);
  if (series.steps() < need)
    throw DataError("series too short: " + std::to_string(series.steps()) + " steps, need at least " +
                    std::to_string(need));
  const std::size_t first = first_admissible_t0(spec, ld, lw);
  const std::size_t last = series.steps() - spec.Q;
  const std::size_t n = last - first + 1;
  const auto n_train = static_cast<std::size_t>(std::floor(spec.split.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(spec.split.val * static_cast<double>(n)));
  if (n_train == 0) throw DataError("series too short: no training samples");
  OriginSplits out;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t0 = first + k;
    if (k < n_train)
      out.train.push_back(t0);
    else if (k < n_train + n_val)
      out.val.push_back(t0);
    else
      out.test.push_back(t0);
  }
  out.train_end = out.train.back() + spec.Q;
  return out;
}

TrainingSample make_sample(const SignalSeries& series, const DatasetSpec& spec, std::size_t t0) {
  const std::size_t n = series.nodes(), c = series.channels(), frame = n * c;
  TrainingSample s;
  s.t0 = t0;
  std::vector<double> r(spec.P * frame);
  copy_steps(series, t0 - spec.P, spec.P, r.data());
  s.R = Tensor({spec.P, n, c}, std::move(r));
  if (spec.d_count > 0) s.D = periodic_blocks(series, spec, t0, spec.d_count, series.samples_per_day);
  if (spec.w_count > 0) s.W = periodic_blocks(series, spec, t0, spec.w_count, series.samples_per_week);
  std::vector<double> y(spec.Q * frame);
  copy_steps(series, t0, spec.Q, y.data());
  s.Y = Tensor({spec.Q, n, c}, std::move(y));
  return s;
}

SampleSplits build_samples(const SignalSeries& series, const DatasetSpec& spec) {
  const OriginSplits origins = split_origins(series, spec);
  SampleSplits out;
  for (auto t0 : origins.train) out.train.push_back(make_sample(series, spec, t0));
  for (auto t0 : origins.val) out.val.push_back(make_sample(series, spec, t0));
  for (auto t0 : origins.test) out.test.push_back(make_sample(series, spec, t0));
  return out;
}

SynthResult synth_generate(const SynthOptions& opts) {
  if (opts.n_nodes == 0 || opts.days == 0 || opts.samples_per_day == 0)
    throw ConfigError("synthetic series needs positive nodes, days and samples_per_day");
  if (!(opts.shift_max >= 0.0)) throw ConfigError("shift_max must be nonnegative");
  if (!(opts.noise >= 0.0)) throw ConfigError("noise must be nonnegative");

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> base_dist(50.0, 100.0);
  std::uniform_real_distribution<double> amp_dist(10.0, 40.0);
  std::uniform_real_distribution<double> shift_dist(-opts.shift_max, opts.shift_max);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t n = opts.n_nodes, ld = opts.samples_per_day, lw = 7 * ld;
  const std::size_t steps = opts.days * ld;
  std::vector<double> base(n), amp(n);
  for (std::size_t i = 0; i < n; ++i) {
    base[i] = base_dist(rng);
    amp[i] = amp_dist(rng);
  }
  SynthResult out;
  out.shifts.assign(n, std::vector<double>(opts.days, 0.0));
  if (opts.shift_max > 0.0)
    for (std::size_t i = 0; i < n; ++i)
      for (auto& d : out.shifts[i]) d = shift_dist(rng);

  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> v(steps * n);
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t day = t / ld;
    const double td = static_cast<double>(t);
    for (std::size_t i = 0; i < n; ++i) {
      double x = base[i] + amp[i] * std::sin(two_pi * (td + out.shifts[i][day]) / static_cast<double>(ld));
      x += opts.weekly_amp * amp[i] * std::sin(two_pi * td / static_cast<double>(lw));
      if (opts.noise > 0.0) x += opts.noise * amp[i] * gauss(rng);
      v[t * n + i] = x;
    }
  }
  out.series = SignalSeries{Tensor({steps, n, 1}, std::move(v)), ld, lw};

  out.graph.n_nodes = n;
  out.graph.kappa = std::numeric_limits<double>::infinity();
  if (n > 1)
    for (std::size_t i = 0; i < (n == 2 ? 1 : n); ++i) out.graph.edges.push_back({i, (i + 1) % n, 1.0});
  return out;
}

}  // namespace stgcgrn::data
