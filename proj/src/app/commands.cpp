#include "stgcgrn/app/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "stgcgrn/checkpoint.hpp"
#include "stgcgrn/errors.hpp"
#include "stgcgrn/gradcheck_suite.hpp"
#include "stgcgrn/tensor_io.hpp"
#include "stgcgrn/trainer.hpp"

namespace stgcgrn::app {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
  if (!os) throw DataError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

std::string four(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

// Config plus the data it points at, checked before any training starts.
struct Inputs {
  RunConfig cfg;
  train::Dataset dataset;
};

Inputs load_inputs(const fs::path& config_path, const Overrides& overrides) {
  Inputs in;
  in.cfg = load_config(config_path);
  apply_overrides(in.cfg, overrides);
  auto& cfg = in.cfg;
  if (cfg.series_path.empty()) throw ConfigError("data.series: required");
  if (cfg.edges_path.empty()) throw ConfigError("data.edges: required");
  for (const auto& p : {cfg.series_path, cfg.edges_path})
    if (!fs::is_regular_file(p)) throw DataError("missing data file: " + p.string());
  const auto raw = data::load_series(cfg.series_path, cfg.samples_per_day, cfg.samples_per_week);
  finalize(cfg, raw.nodes(), raw.channels());
  in.dataset = train::prepare_dataset(raw, graph_spec(cfg, raw.nodes()), cfg.dataset);
  return in;
}

json input_digests(const RunConfig& cfg) {
  return {{"series", {{"path", cfg.series_path.string()}, {"fnv1a64", io::file_digest(cfg.series_path)}}},
          {"edges", {{"path", cfg.edges_path.string()}, {"fnv1a64", io::file_digest(cfg.edges_path)}}}};
}

json sample_counts(const train::Dataset& ds) {
  return {{"train", ds.samples.train.size()},
          {"val", ds.samples.val.size()},
          {"test", ds.samples.test.size()},
          {"train_end", ds.train_end}};
}

std::string cell_file_name(const std::string& label) {
  std::string s;
  for (char c : label) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return "cell_" + s + ".txt";
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CheckFailure*>(&e)) return kCheckFailed;
  if (dynamic_cast<const DivergenceError*>(&e)) return kDivergence;
  if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return kData;
  return kData;
}

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.ablation) cfg.model.ablation = model::Ablation::parse(*o.ablation);
  if (o.order) cfg.model.order = model::parse_layer_order(*o.order);
  if (o.seeds) {
    if (o.seeds->empty()) throw ConfigError("--seeds: expected at least one seed");
    cfg.train.seeds = *o.seeds;
  }
  if (o.jobs) cfg.train.jobs = *o.jobs;
  if (o.max_epochs) cfg.train.max_epochs = *o.max_epochs;
  if (o.max_steps) cfg.train.max_steps = *o.max_steps;
  if (o.patience) cfg.train.patience = *o.patience;
  if (o.batch_size) cfg.train.batch_size = *o.batch_size;
  if (o.n_head) cfg.model.n_head = *o.n_head;
  if (o.d_h) cfg.model.d_h = *o.d_h;
  if (o.learning_rate) cfg.train.learning_rate = *o.learning_rate;
}

void cmd_gen_data(const GenDataOptions& opts, std::ostream& log) {
  const auto synth = data::synth_generate(opts.synth);
  ensure_dir(opts.out_dir);
  const fs::path series = opts.out_dir / "series.stgt", edges = opts.out_dir / "edges.csv";
  data::save_series(series, synth.series);
  graph::write_edge_list(edges, synth.graph.edges);
  const auto& s = opts.synth;
  json manifest = {{"kind", "stgcgrn-gen-data"},
                   {"options",
                    {{"nodes", s.n_nodes},
                     {"days", s.days},
                     {"samples_per_day", s.samples_per_day},
                     {"samples_per_week", synth.series.samples_per_week},
                     {"shift_max", s.shift_max},
                     {"noise", s.noise},
                     {"weekly_amp", s.weekly_amp},
                     {"seed", s.seed}}},
                   {"files",
                    {{"series", {{"path", "series.stgt"}, {"fnv1a64", io::file_digest(series)}}},
                     {"edges", {{"path", "edges.csv"}, {"fnv1a64", io::file_digest(edges)}}}}},
                   {"graph", {{"kappa", "inf"}}}};
  write_json(opts.out_dir / "gen_manifest.json", manifest);
  log << "wrote " << synth.series.steps() << " steps x " << synth.series.nodes() << " nodes to "
      << opts.out_dir.string() << "\n";
}

void cmd_train(const RunOptions& opts, std::ostream& log) {
  const auto t_start = Clock::now();
  Inputs in = load_inputs(opts.config, opts.overrides);
  const auto& cfg = in.cfg;
  ensure_dir(opts.out_dir);

  json outputs = {{"metrics", "metrics.txt"}};
  for (auto seed : cfg.train.seeds) {
    const std::string k = std::to_string(seed);
    outputs["seed_" + k] = {{"checkpoint", "checkpoint_seed" + k + ".bin"},
                            {"history", "history_seed" + k + ".csv"},
                            {"test_report", "test_seed" + k + ".txt"}};
  }
  json manifest = {{"kind", "stgcgrn-run"},
                   {"status", "running"},
                   {"started_at", utc_now()},
                   {"config", resolved_json(cfg)},
                   {"inputs", input_digests(cfg)},
                   {"samples", sample_counts(in.dataset)},
                   {"seeds", cfg.train.seeds},
                   {"outputs", outputs}};
  const fs::path manifest_path = opts.out_dir / "run_manifest.json";
  write_json(manifest_path, manifest);
  const double load_seconds = seconds_since(t_start);

  log << "training " << cfg.model.ablation.label() << " (" << model::to_string(cfg.model.order) << ") on "
      << in.dataset.samples.train.size() << " samples, seeds";
  for (auto s : cfg.train.seeds) log << ' ' << s;
  log << "\n";

  const auto t_train = Clock::now();
  train::TrainResult result;
  try {
    result = train::train(cfg.model, in.dataset, cfg.train);
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    write_json(manifest_path, manifest);
    throw;
  }
  const double train_seconds = seconds_since(t_train);

  json seed_timings = json::object();
  for (const auto& run : result.runs) {
    const std::string k = std::to_string(run.seed);
    checkpoint::save(opts.out_dir / ("checkpoint_seed" + k + ".bin"), run.best);
    write_text_file(opts.out_dir / ("history_seed" + k + ".csv"), train::format_history(run.history));
    write_text_file(opts.out_dir / ("test_seed" + k + ".txt"), train::format_metric_report(run.test, cfg.model.Q));
    double secs = 0.0;
    for (const auto& h : run.history) secs += h.seconds;
    seed_timings[k] = {{"seconds", secs}, {"epochs", run.history.size()}, {"steps", run.steps}};
    log << "seed " << k << ": best epoch " << run.best_epoch << ", test MAE " << four(run.test.overall.mae)
        << ", MAPE " << four(run.test.overall.mape) << "%, RMSE " << four(run.test.overall.rmse) << "\n";
  }
  write_text_file(opts.out_dir / "metrics.txt", train::format_report(result, cfg.model, cfg.train));

  manifest["status"] = "finished";
  manifest["finished_at"] = utc_now();
  manifest["timings"] = {{"load_seconds", load_seconds},
                         {"train_seconds", train_seconds},
                         {"total_seconds", seconds_since(t_start)},
                         {"per_seed", seed_timings}};
  write_json(manifest_path, manifest);
  log << "mean test MAE " << four(result.test.mean.mae) << " (std " << four(result.test.std.mae) << ") -> "
      << opts.out_dir.string() << "\n";
}

std::string cmd_eval(const EvalOptions& opts, std::ostream& log) {
  Inputs in = load_inputs(opts.config, opts.overrides);
  const auto& cfg = in.cfg;
  if (!fs::is_regular_file(opts.checkpoint)) throw DataError("missing checkpoint: " + opts.checkpoint.string());
  auto state = model::ModelState::init(cfg.model, 0);
  checkpoint::load(opts.checkpoint, state);
  const auto report = train::evaluate(state, cfg.model, in.dataset, in.dataset.samples.test, cfg.train);
  const std::string text = train::format_metric_report(report, cfg.model.Q);
  if (opts.report)
    write_text_file(*opts.report, text);
  else
    log << text;
  return text;
}

void cmd_gradcheck(const GradcheckOptions& opts, std::ostream& log) {
  debug::set_fault(opts.fault);
  struct Reset {
    ~Reset() { debug::set_fault(debug::Fault::none); }
  } reset;

  const auto t0 = Clock::now();
  auto checks = checks::primitive_suite(opts.seed, 1e-6);
  checks::ToyOptions toy;
  toy.seed = opts.seed;
  toy.probes = opts.probes;
  checks.push_back(checks::model_check(toy));

  std::ostringstream report;
  report << std::setprecision(17) << "check,max_rel_error,max_abs_error,checked,tolerance,status\n";
  std::size_t failed = 0;
  for (const auto& c : checks) {
    const double tol = c.name == "model" ? toy.tolerance : 1e-6;
    report << c.name << ',' << c.report.max_rel_error << ',' << c.report.max_abs_error << ',' << c.report.checked << ','
           << four(tol) << ',' << (c.report.passed ? "pass" : "FAIL") << '\n';
    if (!c.report.passed) ++failed;
  }
  if (opts.report) write_text_file(*opts.report, report.str());
  log << report.str() << checks.size() - failed << "/" << checks.size() << " checks passed in "
      << four(seconds_since(t0)) << " s\n";
  if (failed) throw CheckFailure(std::to_string(failed) + " gradient check(s) exceeded tolerance");
}

void cmd_experiment(const std::string& kind_text, const RunOptions& opts, std::ostream& log) {
  const auto kind = train::parse_experiment_kind(kind_text);
  const auto t_start = Clock::now();
  Inputs in = load_inputs(opts.config, opts.overrides);
  const auto& cfg = in.cfg;
  ensure_dir(opts.out_dir);

  const auto grid = train::experiment_grid(kind, cfg.model);
  json cells = json::array();
  for (const auto& c : grid) cells.push_back({{"label", c.label}, {"report", cell_file_name(c.label)}});
  json manifest = {{"kind", "stgcgrn-experiment"},
                   {"experiment", kind_text},
                   {"status", "running"},
                   {"started_at", utc_now()},
                   {"config", resolved_json(cfg)},
                   {"inputs", input_digests(cfg)},
                   {"samples", sample_counts(in.dataset)},
                   {"cells", cells},
                   {"outputs", {{"table", "table.csv"}}}};
  const fs::path manifest_path = opts.out_dir / "experiment_manifest.json";
  write_json(manifest_path, manifest);

  log << "experiment " << kind_text << ": " << grid.size() << " cells x " << cfg.train.seeds.size() << " seeds\n";
  const auto results = train::run_experiment(kind, cfg.model, in.dataset, cfg.train);
  std::size_t failed = 0;
  for (const auto& r : results) {
    const fs::path path = opts.out_dir / cell_file_name(r.cell.label);
    if (r.result) {
      write_text_file(path, train::format_report(*r.result, r.cell.cfg, cfg.train));
      log << std::left << std::setw(14) << r.cell.label << " MAE " << four(r.result->test.mean.mae) << " +/- "
          << four(r.result->test.std.mae) << "\n";
    } else {
      ++failed;
      write_text_file(path, "error=" + r.error + "\n");
      log << std::left << std::setw(14) << r.cell.label << " failed: " << r.error << "\n";
    }
  }
  write_text_file(opts.out_dir / "table.csv", train::comparison_table(results, cfg.model.Q));
  manifest["status"] = failed ? "finished_with_errors" : "finished";
  manifest["failed_cells"] = failed;
  manifest["finished_at"] = utc_now();
  manifest["timings"] = {{"total_seconds", seconds_since(t_start)}};
  write_json(manifest_path, manifest);
}

}  // namespace stgcgrn::app
