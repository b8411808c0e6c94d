#include <iomanip>
#include <sstream>

#include "stgcgrn/trainer.hpp"

namespace stgcgrn::train {
namespace {

std::ostringstream machine_stream() {
  std::ostringstream os;
  os << std::setprecision(17);
  return os;
}

template <typename Fn>
void write_array(std::ostream& os, const std::string& key, const std::vector<MetricSet>& sets, Fn field) {
  os << key << '=';
  for (std::size_t i = 0; i < sets.size(); ++i) os << (i ? "," : "") << field(sets[i]);
  os << '\n';
}

void write_metric_block(std::ostream& os, const std::string& prefix, const MetricSet& m) {
  os << prefix << "mae=" << m.mae << '\n' << prefix << "mape=" << m.mape << '\n' << prefix << "rmse=" << m.rmse << '\n';
}

void write_steps(std::ostream& os, const std::string& prefix, const std::vector<MetricSet>& steps) {
  write_array(os, prefix + "mae", steps, [](const MetricSet& m) { return m.mae; });
  write_array(os, prefix + "mape", steps, [](const MetricSet& m) { return m.mape; });
  write_array(os, prefix + "rmse", steps, [](const MetricSet& m) { return m.rmse; });
}

std::string join_steps(const std::vector<std::size_t>& steps) {
  std::string s;
  for (std::size_t i = 0; i < steps.size(); ++i) s += (i ? "," : "") + std::to_string(steps[i]);
  return s;
}

}  // namespace

std::string format_metric_report(const MetricReport& report, std::size_t Q) {
  auto os = machine_stream();
  os << "count=" << report.count << '\n' << "mape_count=" << report.mape_count << '\n';
  write_metric_block(os, "test.", report.overall);
  write_steps(os, "test.per_step.", report.per_step);
  os << "horizon.steps=" << join_steps(horizon_steps(Q)) << '\n';
  return os.str();
}

std::string format_report(const TrainResult& result, const model::ModelConfig& cfg, const TrainConfig& tc) {
  auto os = machine_stream();
  os << "variant=" << cfg.ablation.label() << '\n';
  os << "order=" << model::to_string(cfg.order) << '\n';
  os << "n_head=" << cfg.n_head << '\n';
  os << "seeds=";
  for (std::size_t i = 0; i < tc.seeds.size(); ++i) os << (i ? "," : "") << tc.seeds[i];
  os << '\n';
  os << "horizon.steps=" << join_steps(horizon_steps(cfg.Q)) << '\n';
  write_metric_block(os, "test.mean.", result.test.mean);
  write_metric_block(os, "test.std.", result.test.std);
  write_steps(os, "test.per_step.mean.", result.test.step_mean);
  write_steps(os, "test.per_step.std.", result.test.step_std);
  for (const auto& run : result.runs) {
    const std::string p = "seed." + std::to_string(run.seed) + ".";
    os << p << "best_epoch=" << run.best_epoch << '\n';
    os << p << "best_val_mae=" << run.best_val_mae << '\n';
    os << p << "steps=" << run.steps << '\n';
    write_metric_block(os, p + "test.", run.test.overall);
    write_steps(os, p + "test.per_step.", run.test.per_step);
  }
  return os.str();
}

std::string format_history(const std::vector<EpochRecord>& history) {
  auto os = machine_stream();
  os << "epoch,train_mae,val_mae,seconds\n";
  for (const auto& h : history) os << h.epoch << ',' << h.train_mae << ',' << h.val_mae << ',' << h.seconds << '\n';
  return os.str();
}

std::string comparison_table(const std::vector<CellResult>& cells, std::size_t Q) {
  const auto horizons = horizon_steps(Q);
  auto os = machine_stream();
  os << "label,variant,order,n_head,status,mae_mean,mae_std,mape_mean,mape_std,rmse_mean,rmse_std";
  for (auto s : horizons) os << ",mae_step" << s << ",mape_step" << s << ",rmse_step" << s;
  os << '\n';
  for (const auto& c : cells) {
    os << c.cell.label << ',' << c.cell.cfg.ablation.label() << ',' << model::to_string(c.cell.cfg.order) << ','
       << c.cell.cfg.n_head << ',';
    if (!c.result) {
      std::string msg = c.error;
      for (auto& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      os << "error: " << msg;
      for (std::size_t i = 0; i < 6 + 3 * horizons.size(); ++i) os << ',';
      os << '\n';
      continue;
    }
    const auto& a = c.result->test;
    os << "ok," << a.mean.mae << ',' << a.std.mae << ',' << a.mean.mape << ',' << a.std.mape << ',' << a.mean.rmse
       << ',' << a.std.rmse;
    for (auto s : horizons) {
      const auto& m = a.step_mean[s - 1];
      os << ',' << m.mae << ',' << m.mape << ',' << m.rmse;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace stgcgrn::train
