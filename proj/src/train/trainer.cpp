#include "stgcgrn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "stgcgrn/errors.hpp"
#include "stgcgrn/ops.hpp"

namespace stgcgrn::train {
namespace {

// Runs task(i) for i in [0, count) on up to `jobs` threads; rethrows the
// first failure by index.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(jobs, count); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

std::pair<MetricSet, MetricSet> mean_std(const std::vector<MetricSet>& sets) {
  std::vector<double> mae, mape, rmse;
  for (const auto& s : sets) {
    mae.push_back(s.mae);
    mape.push_back(s.mape);
    rmse.push_back(s.rmse);
  }
  auto mean = [](const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  };
  return {{mean(mae), mean(mape), mean(rmse)}, {sample_std(mae), sample_std(mape), sample_std(rmse)}};
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (cfg.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (cfg.patience == 0) throw ConfigError("train.patience must be >= 1");
  if (cfg.max_epochs == 0) throw ConfigError("train.max_epochs must be >= 1");
  if (cfg.seeds.empty()) throw ConfigError("train.seeds must not be empty");
  if (cfg.jobs == 0) throw ConfigError("train.jobs must be >= 1");
  if (cfg.clip && !(cfg.clip_norm > 0.0)) throw ConfigError("train.clip_norm must be positive");
}

Dataset prepare_dataset(const data::SignalSeries& raw, const graph::GraphSpec& graph, const data::DatasetSpec& spec) {
  if (graph.n_nodes != raw.nodes())
    throw DataError("graph has " + std::to_string(graph.n_nodes) + " nodes but series has " +
                    std::to_string(raw.nodes()));
  const data::OriginSplits origins = data::split_origins(raw, spec);
  auto [norm, normalized] = data::fit_apply_zscore(raw, 0, origins.train_end);
  Dataset ds;
  ds.samples = data::build_samples(normalized, spec);
  ds.series = std::move(normalized);
  ds.normalizer = std::move(norm);
  ds.adjacency = graph::row_normalize(graph::build_predefined(graph)).matrix;
  ds.train_end = origins.train_end;
  return ds;
}

Tensor predict(const model::ModelState& state, const model::ModelConfig& cfg, const Tensor& adjacency,
               const std::vector<data::TrainingSample>& samples, std::size_t batch_size) {
  if (samples.empty()) throw std::invalid_argument("predict: no samples");
  std::vector<double> out;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    std::vector<const data::TrainingSample*> ptrs;
    for (std::size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) ptrs.push_back(&samples[i]);
    const auto trace = model::forward(model::make_batch(ptrs), state, cfg, adjacency, false);
    auto v = trace.predictions.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  const Tensor& y = samples.front().Y;
  return Tensor({samples.size(), y.dim(0), y.dim(1), y.dim(2)}, std::move(out));
}

Tensor stack_targets(const std::vector<data::TrainingSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("stack_targets: no samples");
  std::vector<const data::TrainingSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  return model::make_batch(ptrs).Y;
}

MetricReport evaluate(const model::ModelState& state, const model::ModelConfig& cfg, const Dataset& ds,
                      const std::vector<data::TrainingSample>& samples, const TrainConfig& tc) {
  const Tensor pred = predict(state, cfg, ds.adjacency, samples, tc.batch_size);
  return metrics(pred, stack_targets(samples), ds.normalizer, tc.mape_floor);
}

Aggregate aggregate(const std::vector<MetricReport>& reports) {
  Aggregate a;
  if (reports.empty()) return a;
  std::vector<MetricSet> overall;
  for (const auto& r : reports) overall.push_back(r.overall);
  std::tie(a.mean, a.std) = mean_std(overall);
  const std::size_t q = reports.front().per_step.size();
  for (std::size_t t = 0; t < q; ++t) {
    std::vector<MetricSet> step;
    for (const auto& r : reports) step.push_back(r.per_step[t]);
    auto [m, s] = mean_std(step);
    a.step_mean.push_back(m);
    a.step_std.push_back(s);
  }
  return a;
}

SeedRun train_seed(const model::ModelConfig& cfg, const Dataset& ds, const TrainConfig& tc, std::uint64_t seed,
                   const TrainHooks& hooks) {
  validate(tc);
  model::validate(cfg);
  if (ds.samples.train.empty()) throw DataError("no training samples");
  const auto& train_set = ds.samples.train;
  const auto& val_set = ds.samples.val.empty() ? ds.samples.train : ds.samples.val;

  model::ModelState state = model::ModelState::init(cfg, seed);
  const std::vector<Tensor> params = state.parameters();
  AdamState adam;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  SeedRun run;
  run.seed = seed;
  run.best = state.deep_copy();
  run.best_val_mae = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;
  bool step_cap_hit = false;

  for (std::size_t epoch = 1; epoch <= tc.max_epochs && !step_cap_hit; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      std::vector<const data::TrainingSample*> ptrs;
      for (std::size_t i = start; i < std::min(order.size(), start + tc.batch_size); ++i)
        ptrs.push_back(&train_set[order[i]]);
      const model::Batch batch = model::make_batch(ptrs);
      for (auto p : params) p.zero_grad();
      double loss_value = 0.0;
      {
        Tape tape;
        TapeScope scope(tape);
        const auto trace = model::forward(batch, state, cfg, ds.adjacency, tc.teacher_forcing);
        const Tensor loss = mae_loss(trace.predictions, batch.Y);
        loss_value = loss.item();
        if (!std::isfinite(loss_value))
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(start / tc.batch_size + 1) + " (seed " + std::to_string(seed) + ")");
        backward(loss, tape);
      }
      if (tc.clip) clip_grad_norm(params, tc.clip_norm);
      adam_step(params, adam, tc);
      ++run.steps;
      if (hooks.on_step) hooks.on_step(run.steps, loss_value);
      loss_sum += loss_value * static_cast<double>(ptrs.size());
      seen += ptrs.size();
      if (tc.max_steps && run.steps >= tc.max_steps) {
        step_cap_hit = true;
        break;
      }
    }

    const Tensor val_pred = predict(state, cfg, ds.adjacency, val_set, tc.batch_size);
    double val_mae = mae_loss(val_pred, stack_targets(val_set)).item();
    if (hooks.validation_override) val_mae = hooks.validation_override(epoch, val_mae);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    run.history.push_back({epoch, loss_sum / static_cast<double>(seen), val_mae, seconds});

    if (val_mae < run.best_val_mae) {
      run.best_val_mae = val_mae;
      run.best_epoch = epoch;
      run.best.copy_values_from(state);
      bad_epochs = 0;
    } else if (++bad_epochs >= tc.patience) {
      break;
    }
  }
  const auto& test_set = ds.samples.test.empty() ? val_set : ds.samples.test;
  run.test = evaluate(run.best, cfg, ds, test_set, tc);
  return run;
}

TrainResult train(const model::ModelConfig& cfg, const Dataset& ds, const TrainConfig& tc, const TrainHooks& hooks) {
  validate(tc);
  TrainResult result;
  result.runs.resize(tc.seeds.size());
  parallel_for(tc.seeds.size(), tc.jobs,
               [&](std::size_t i) { result.runs[i] = train_seed(cfg, ds, tc, tc.seeds[i], hooks); });
  std::vector<MetricReport> reports;
  for (const auto& r : result.runs) reports.push_back(r.test);
  result.test = aggregate(reports);
  return result;
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::ablation:
      return "ablation";
    case ExperimentKind::multihead:
      return "multihead";
    case ExperimentKind::order:
      return "order";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
  if (text == "ablation") return ExperimentKind::ablation;
  if (text == "multihead") return ExperimentKind::multihead;
  if (text == "order") return ExperimentKind::order;
  throw ConfigError("experiment kind must be ablation, multihead or order, got '" + text + "'");
}

std::vector<GridCell> experiment_grid(ExperimentKind kind, const model::ModelConfig& base) {
  std::vector<GridCell> grid;
  switch (kind) {
    case ExperimentKind::ablation: {
      const std::pair<const char*, const char*> variants[] = {
          {"STGCGRN", "full"},           {"w/o pre", "no_pre"},        {"w/o adp", "no_adp"},
          {"w/o pre&adp", "no_pre+no_adp"}, {"w/o window", "no_window"}, {"w/o period", "no_period"},
      };
      for (auto [label, flags] : variants) {
        GridCell cell{label, base};
        cell.cfg.ablation = model::Ablation::parse(flags);
        grid.push_back(cell);
      }
      break;
    }
    case ExperimentKind::multihead:
      for (std::size_t heads : {1, 2, 4, 8, 16}) {
        GridCell cell{std::to_string(heads) + "H", base};
        cell.cfg.n_head = heads;
        grid.push_back(cell);
      }
      break;
    case ExperimentKind::order:
      for (auto order : {model::LayerOrder::attention_then_dgc, model::LayerOrder::dgc_then_attention}) {
        GridCell cell{order == model::LayerOrder::attention_then_dgc ? "STGCGRN" : "STGCGRN_rev", base};
        cell.cfg.order = order;
        grid.push_back(cell);
      }
      break;
  }
  return grid;
}

std::vector<CellResult> run_experiment(ExperimentKind kind, const model::ModelConfig& base, const Dataset& ds,
                                       const TrainConfig& tc) {
  const auto grid = experiment_grid(kind, base);
  std::vector<CellResult> cells(grid.size());
  TrainConfig inner = tc;
  inner.jobs = 1;
  parallel_for(grid.size(), tc.jobs, [&](std::size_t i) {
    cells[i].cell = grid[i];
    try {
      cells[i].result = train(grid[i].cfg, ds, inner);
    } catch (const std::exception& e) {
      cells[i].error = e.what();
    }
  });
  return cells;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace stgcgrn::train
