#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stgcgrn/data.hpp"
#include "stgcgrn/model.hpp"

namespace stgcgrn::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 200;
  std::size_t patience = 15;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool clip = true;
  double clip_norm = 5.0;
  std::size_t max_steps = 0;  // 0 = no step cap
  bool teacher_forcing = false;
  double mape_floor = 1e-3;
  std::size_t jobs = 1;
};

void validate(const TrainConfig& cfg);

// Mean absolute error; subgradient 0 at exact ties.
Tensor mae_loss(const Tensor& pred, const Tensor& target);

struct MetricSet {
  double mae = 0.0;
  double mape = 0.0;  // percent
  double rmse = 0.0;
};

struct MetricReport {
  MetricSet overall;
  std::vector<MetricSet> per_step;  // one per forecast step
  std::size_t count = 0;
  std::size_t mape_count = 0;
};

// pred/target: [B x Q x N x C] in normalized units; metrics are computed
// after the inverse transform. MAPE skips targets with |y| <= mape_floor.
MetricReport metrics(const Tensor& pred, const Tensor& target, const data::Normalizer& normalizer,
                     double mape_floor = 1e-3);

// 1-indexed steps for quarter-horizon reporting (3, 6, 9, 12 when Q = 12).
std::vector<std::size_t> horizon_steps(std::size_t Q);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

// One bias-corrected Adam update from the parameters' grad buffers.
void adam_step(const std::vector<Tensor>& params, AdamState& state, const TrainConfig& cfg);

// Rescales gradients in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

// Normalized series, train-fit normalizer, chronological samples, and the
// row-normalized predefined adjacency.
struct Dataset {
  data::SignalSeries series;
  data::Normalizer normalizer;
  data::SampleSplits samples;
  Tensor adjacency;
  std::size_t train_end = 0;
};

Dataset prepare_dataset(const data::SignalSeries& raw, const graph::GraphSpec& graph, const data::DatasetSpec& spec);

// Predictions for `samples` in normalized units, [count x Q x N x C].
Tensor predict(const model::ModelState& state, const model::ModelConfig& cfg, const Tensor& adjacency,
               const std::vector<data::TrainingSample>& samples, std::size_t batch_size);

Tensor stack_targets(const std::vector<data::TrainingSample>& samples);

MetricReport evaluate(const model::ModelState& state, const model::ModelConfig& cfg, const Dataset& ds,
                      const std::vector<data::TrainingSample>& samples, const TrainConfig& tc);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_mae = 0.0;
  double val_mae = 0.0;
  double seconds = 0.0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  model::ModelState best;
  double best_val_mae = 0.0;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  MetricReport test;
  std::vector<EpochRecord> history;
};

struct Aggregate {
  MetricSet mean;
  MetricSet std;
  std::vector<MetricSet> step_mean;
  std::vector<MetricSet> step_std;
};

Aggregate aggregate(const std::vector<MetricReport>& reports);

struct TrainResult {
  std::vector<SeedRun> runs;
  Aggregate test;
};

struct TrainHooks {
  // Replaces the measured validation MAE (used to exercise early stopping).
  std::function<double(std::size_t epoch, double val_mae)> validation_override;
  // Called after every optimizer step with the step count and batch loss.
  std::function<void(std::size_t step, double loss)> on_step;
};

SeedRun train_seed(const model::ModelConfig& cfg, const Dataset& ds, const TrainConfig& tc, std::uint64_t seed,
                   const TrainHooks& hooks = {});

// Runs every seed (up to tc.jobs at a time); results are in seed order.
TrainResult train(const model::ModelConfig& cfg, const Dataset& ds, const TrainConfig& tc,
                  const TrainHooks& hooks = {});

enum class ExperimentKind { ablation, multihead, order };
std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

struct GridCell {
  std::string label;
  model::ModelConfig cfg;
};

std::vector<GridCell> experiment_grid(ExperimentKind kind, const model::ModelConfig& base);

struct CellResult {
  GridCell cell;
  std::optional<TrainResult> result;
  std::string error;
};

// Cells share seeds and data; a failing cell is recorded and the grid continues.
std::vector<CellResult> run_experiment(ExperimentKind kind, const model::ModelConfig& base, const Dataset& ds,
                                       const TrainConfig& tc);

double median(std::vector<double> values);

// Machine-readable key=value report (17 significant digits).
std::string format_report(const TrainResult& result, const model::ModelConfig& cfg, const TrainConfig& tc);
std::string format_metric_report(const MetricReport& report, std::size_t Q);
std::string format_history(const std::vector<EpochRecord>& history);
std::string comparison_table(const std::vector<CellResult>& cells, std::size_t Q);

}  // namespace stgcgrn::train
