#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stgcgrn/app/config.hpp"
#include "stgcgrn/tensor.hpp"

namespace stgcgrn::app {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kDivergence = 4, kCheckFailed = 5 };

// Maps the library's exception classes to exit codes.
int exit_code_for(const std::exception& e);

class CheckFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenDataOptions {
  data::SynthOptions synth;
  std::filesystem::path out_dir = ".";
};

// Writes series.stgt, edges.csv and gen_manifest.json into out_dir.
void cmd_gen_data(const GenDataOptions& opts, std::ostream& log);

// Command-line values that take precedence over the config document.
struct Overrides {
  std::optional<std::string> ablation;
  std::optional<std::string> order;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> max_epochs;
  std::optional<std::size_t> max_steps;
  std::optional<std::size_t> patience;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> n_head;
  std::optional<std::size_t> d_h;
  std::optional<double> learning_rate;
};

void apply_overrides(RunConfig& cfg, const Overrides& o);

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir = "run";
  Overrides overrides;
};

// Checkpoints, histories, per-seed test reports, metrics.txt and
// run_manifest.json (written first, finalized at the end).
void cmd_train(const RunOptions& opts, std::ostream& log);

struct EvalOptions {
  std::filesystem::path config;  // config document or run manifest
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> report;  // also print to the log when empty
  Overrides overrides;
};

std::string cmd_eval(const EvalOptions& opts, std::ostream& log);

struct GradcheckOptions {
  debug::Fault fault = debug::Fault::none;
  std::uint64_t seed = 1;
  std::size_t probes = 32;
  std::optional<std::filesystem::path> report;
};

// Throws CheckFailure when any check exceeds its tolerance.
void cmd_gradcheck(const GradcheckOptions& opts, std::ostream& log);

// Writes table.csv, one report per cell and experiment_manifest.json.
void cmd_experiment(const std::string& kind, const RunOptions& opts, std::ostream& log);

}  // namespace stgcgrn::app
