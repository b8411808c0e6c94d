#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "stgcgrn/graph.hpp"
#include "stgcgrn/tensor.hpp"

namespace stgcgrn::data {

// Raw record, data is [T x N x C].
struct SignalSeries {
  Tensor data;
  std::size_t samples_per_day = 288;
  std::size_t samples_per_week = 2016;

  std::size_t steps() const { return data.dim(0); }
  std::size_t nodes() const { return data.dim(1); }
  std::size_t channels() const { return data.dim(2); }
};

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct DatasetSpec {
  std::size_t P = 12;        // recent input steps
  std::size_t Q = 12;        // forecast steps
  std::size_t S = 3;         // attention window half-width
  std::size_t d_count = 1;   // previous days
  std::size_t w_count = 1;   // previous weeks
  SplitRatios split;

  std::size_t L() const { return Q + S; }
  std::size_t block_len() const { return P + L(); }
};

void validate(const DatasetSpec& spec);
void validate(const SignalSeries& series);

// One supervised example. D and W are empty when the matching count is 0.
// Blocks are ordered most distant first: block b of D covers
// data[t0 - P - (d_count - b) * l_d, t0 + L - (d_count - b) * l_d).
struct TrainingSample {
  Tensor R;  // [P x N x C]
  Tensor D;  // [d_count x (P+L) x N x C]
  Tensor W;  // [w_count x (P+L) x N x C]
  Tensor Y;  // [Q x N x C]
  std::size_t t0 = 0;
};

struct SampleSplits {
  std::vector<TrainingSample> train, val, test;
};

// Per-channel z-score fitted on the training range only.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;

  static constexpr double kStdFloor = 1e-8;

  // Works on any tensor whose last axis is the channel axis.
  Tensor apply(const Tensor& x) const;
  Tensor inverse(const Tensor& x) const;
};

SignalSeries load_series(const std::filesystem::path& path, std::size_t samples_per_day,
                         std::size_t samples_per_week);
void save_series(const std::filesystem::path& path, const SignalSeries& series);

// Statistics over time steps [begin, end).
std::pair<Normalizer, SignalSeries> fit_apply_zscore(const SignalSeries& series, std::size_t begin, std::size_t end);

std::size_t first_admissible_t0(const DatasetSpec& spec, std::size_t samples_per_day, std::size_t samples_per_week);
std::size_t min_series_length(const DatasetSpec& spec, std::size_t samples_per_day, std::size_t samples_per_week);

// Admissible forecast origins split chronologically by the spec's ratios.
struct OriginSplits {
  std::vector<std::size_t> train, val, test;
  // Time steps [0, train_end) are the only ones any training sample reads.
  std::size_t train_end = 0;
};
OriginSplits split_origins(const SignalSeries& series, const DatasetSpec& spec);

TrainingSample make_sample(const SignalSeries& series, const DatasetSpec& spec, std::size_t t0);
SampleSplits build_samples(const SignalSeries& series, const DatasetSpec& spec);

// Synthetic periodic series on a ring graph with unit edge distances.
//   x_i(t) = base_i + amp_i * sin(2 pi (t + delta_i(day)) / l_d)
//          + weekly_amp * amp_i * sin(2 pi t / l_w) + N(0, (noise * amp_i)^2)
// delta_i(day) ~ U[-shift_max, shift_max], drawn per node and day.
struct SynthOptions {
  std::size_t n_nodes = 8;
  std::size_t days = 28;
  std::size_t samples_per_day = 48;
  double shift_max = 0.0;
  double noise = 0.0;
  double weekly_amp = 0.0;
  std::uint64_t seed = 1;
};

struct SynthResult {
  SignalSeries series;
  graph::GraphSpec graph;
  std::vector<std::vector<double>> shifts;  // [node][day]
};

SynthResult synth_generate(const SynthOptions& opts);

}  // namespace stgcgrn::data
