#include "stgcgrn/app/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "stgcgrn/errors.hpp"

namespace stgcgrn::app {
namespace {

using nlohmann::json;

// Reads typed fields of one JSON object and rejects unknown keys.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      node_ = &doc.at(name_);
      if (!node_->is_object()) throw ConfigError(name_ + ": expected an object");
    }
  }

  ~Section() noexcept(false) {
    if (!node_ || std::uncaught_exceptions()) return;
    for (auto it = node_->begin(); it != node_->end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()) + ": unknown field");
  }

  void count(const char* key, std::size_t& dst, bool allow_zero = false) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number_integer() || v->get<long long>() < (allow_zero ? 0 : 1))
      throw ConfigError(path(key) + (allow_zero ? ": expected a nonnegative integer" : ": expected a positive integer"));
    dst = v->get<std::size_t>();
  }

  void real(const char* key, double& dst) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number()) throw ConfigError(path(key) + ": expected a number");
    dst = v->get<double>();
  }

  // Accepts a number, "inf", null or `unset_word` (the last two leave dst empty).
  void optional_real(const char* key, std::optional<double>& dst, const char* unset_word = nullptr) {
    const json* v = find(key);
    if (!v) return;
    if (v->is_null() || (unset_word && v->is_string() && v->get<std::string>() == unset_word)) {
      dst.reset();
    } else if (v->is_string() && v->get<std::string>() == "inf") {
      dst = std::numeric_limits<double>::infinity();
    } else if (v->is_number()) {
      dst = v->get<double>();
    } else {
      throw ConfigError(path(key) + ": expected a number, \"inf\" or null");
    }
  }

  void flag(const char* key, bool& dst) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError(path(key) + ": expected true or false");
    dst = v->get<bool>();
  }

  void text(const char* key, std::string& dst) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_string()) throw ConfigError(path(key) + ": expected a string");
    dst = v->get<std::string>();
  }

  const json* find(const char* key) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return nullptr;
    return &node_->at(key);
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : std::filesystem::absolute(base / path).lexically_normal();
}

json number_or_inf(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (it.key() != "data" && it.key() != "graph" && it.key() != "model" && it.key() != "train")
      throw ConfigError(it.key() + ": unknown section");

  RunConfig cfg;
  bool week_given = false;
  {
    Section s(doc, "data");
    std::string series, edges;
    s.text("series", series);
    s.text("edges", edges);
    cfg.series_path = resolve(base_dir, series);
    cfg.edges_path = resolve(base_dir, edges);
    s.count("samples_per_day", cfg.samples_per_day);
    week_given = s.find("samples_per_week") != nullptr;
    s.count("samples_per_week", cfg.samples_per_week);
    if (!week_given) cfg.samples_per_week = 7 * cfg.samples_per_day;
    s.count("P", cfg.dataset.P);
    s.count("Q", cfg.dataset.Q);
    s.count("S", cfg.dataset.S, true);
    s.count("days", cfg.dataset.d_count, true);
    s.count("weeks", cfg.dataset.w_count, true);
    s.find("L");  // derived, written by resolved_json
    if (const json* split = s.find("split")) {
      if (!split->is_array() || split->size() != 3 || !(*split)[0].is_number() || !(*split)[1].is_number() ||
          !(*split)[2].is_number())
        throw ConfigError("data.split: expected three numbers");
      cfg.dataset.split = {(*split)[0].get<double>(), (*split)[1].get<double>(), (*split)[2].get<double>()};
    }
  }
  {
    Section s(doc, "graph");
    s.optional_real("kappa", cfg.kappa);
    s.optional_real("sigma", cfg.sigma, "stddev");
  }
  {
    Section s(doc, "model");
    auto& m = cfg.model;
    s.count("d_h", m.d_h);
    s.count("d_e", m.d_e);
    s.count("n_head", m.n_head);
    s.count("K", m.K);
    s.real("w_pre", m.w_pre);
    s.real("w_adp", m.w_adp);
    std::string ablation = m.ablation.label(), order = model::to_string(m.order);
    s.text("ablation", ablation);
    s.text("order", order);
    for (const char* derived : {"n_nodes", "channels", "d_a", "attention_candidates", "block_len"}) s.find(derived);
    try {
      m.ablation = model::Ablation::parse(ablation);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("model.ablation: ") + e.what());
    }
    try {
      m.order = model::parse_layer_order(order);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("model.order: ") + e.what());
    }
  }
  {
    Section s(doc, "train");
    auto& t = cfg.train;
    s.real("learning_rate", t.learning_rate);
    s.count("batch_size", t.batch_size);
    s.count("max_epochs", t.max_epochs);
    s.count("patience", t.patience);
    if (const json* seeds = s.find("seeds")) {
      if (!seeds->is_array() || seeds->empty()) throw ConfigError("train.seeds: expected a nonempty array");
      t.seeds.clear();
      for (std::size_t i = 0; i < seeds->size(); ++i) {
        if (!(*seeds)[i].is_number_unsigned())
          throw ConfigError("train.seeds[" + std::to_string(i) + "]: expected a nonnegative integer");
        t.seeds.push_back((*seeds)[i].get<std::uint64_t>());
      }
    }
    s.real("beta1", t.beta1);
    s.real("beta2", t.beta2);
    s.real("eps", t.eps);
    s.flag("clip", t.clip);
    s.real("clip_norm", t.clip_norm);
    s.count("max_steps", t.max_steps, true);
    s.flag("teacher_forcing", t.teacher_forcing);
    s.real("mape_floor", t.mape_floor);
    s.count("jobs", t.jobs);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  // A run manifest carries its resolved configuration under "config".
  if (doc.is_object() && doc.contains("config") && doc.value("kind", "") == "stgcgrn-run")
    return parse_config(doc.at("config"), path.parent_path());
  return parse_config(doc, path.parent_path());
}

void finalize(RunConfig& cfg, std::size_t n_nodes, std::size_t channels) {
  if (!cfg.kappa) throw ConfigError("graph.kappa: required (use \"inf\" to disable thresholding)");
  auto& m = cfg.model;
  m.n_nodes = n_nodes;
  m.channels = channels;
  m.P = cfg.dataset.P;
  m.Q = cfg.dataset.Q;
  m.S = cfg.dataset.S;
  m.d_count = cfg.dataset.d_count;
  m.w_count = cfg.dataset.w_count;
  m.l_d = cfg.samples_per_day;
  m.l_w = cfg.samples_per_week;
  data::validate(cfg.dataset);
  model::validate(m);
  train::validate(cfg.train);
}

json resolved_json(const RunConfig& cfg) {
  const auto& d = cfg.dataset;
  const auto& m = cfg.model;
  const auto& t = cfg.train;
  json doc;
  doc["data"] = {{"series", cfg.series_path.string()},
                 {"edges", cfg.edges_path.string()},
                 {"samples_per_day", cfg.samples_per_day},
                 {"samples_per_week", cfg.samples_per_week},
                 {"P", d.P},
                 {"Q", d.Q},
                 {"S", d.S},
                 {"L", d.L()},
                 {"days", d.d_count},
                 {"weeks", d.w_count},
                 {"split", {d.split.train, d.split.val, d.split.test}}};
  doc["graph"] = {{"kappa", cfg.kappa ? number_or_inf(*cfg.kappa) : json(nullptr)},
                  {"sigma", cfg.sigma ? json(*cfg.sigma) : json("stddev")}};
  doc["model"] = {{"n_nodes", m.n_nodes},
                  {"channels", m.channels},
                  {"d_h", m.d_h},
                  {"d_e", m.d_e},
                  {"d_a", m.attention_width()},
                  {"n_head", m.n_head},
                  {"K", m.K},
                  {"w_pre", m.w_pre},
                  {"w_adp", m.w_adp},
                  {"attention_candidates", m.attention_candidates()},
                  {"block_len", m.block_len()},
                  {"ablation", m.ablation.label()},
                  {"order", model::to_string(m.order)}};
  doc["train"] = {{"learning_rate", t.learning_rate},
                  {"batch_size", t.batch_size},
                  {"max_epochs", t.max_epochs},
                  {"patience", t.patience},
                  {"seeds", t.seeds},
                  {"beta1", t.beta1},
                  {"beta2", t.beta2},
                  {"eps", t.eps},
                  {"clip", t.clip},
                  {"clip_norm", t.clip_norm},
                  {"max_steps", t.max_steps},
                  {"teacher_forcing", t.teacher_forcing},
                  {"mape_floor", t.mape_floor},
                  {"jobs", t.jobs}};
  return doc;
}

graph::GraphSpec graph_spec(const RunConfig& cfg, std::size_t n_nodes) {
  if (!cfg.kappa) throw ConfigError("graph.kappa: required (use \"inf\" to disable thresholding)");
  graph::GraphSpec g;
  g.n_nodes = n_nodes;
  g.edges = graph::read_edge_list(cfg.edges_path);
  g.kappa = *cfg.kappa;
  g.sigma = cfg.sigma;
  return g;
}

}  // namespace stgcgrn::app
