#pragma once

// Run configuration document (JSON). Resolution order: built-in defaults,
// then the document, then command-line overrides. Relative paths in the
// document resolve against the document's directory.

#include <filesystem>
#include <optional>

#include "json.hpp"
#include "stgcgrn/data.hpp"
#include "stgcgrn/model.hpp"
#include "stgcgrn/trainer.hpp"

namespace stgcgrn::app {

struct RunConfig {
  std::filesystem::path series_path;
  std::filesystem::path edges_path;
  std::size_t samples_per_day = 288;
  std::size_t samples_per_week = 2016;
  data::DatasetSpec dataset;
  std::optional<double> kappa;  // required before use
  std::optional<double> sigma;
  model::ModelConfig model;
  train::TrainConfig train;
};

RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

// Copies data-derived and mirrored fields into the model config and checks
// everything; throws ConfigError naming the offending field.
void finalize(RunConfig& cfg, std::size_t n_nodes, std::size_t channels);

// Fully materialized document: every default written out as a value.
nlohmann::json resolved_json(const RunConfig& cfg);

graph::GraphSpec graph_spec(const RunConfig& cfg, std::size_t n_nodes);

}  // namespace stgcgrn::app
