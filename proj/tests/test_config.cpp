#include <gtest/gtest.h>

#include "stgcgrn/app/commands.hpp"
#include "stgcgrn/errors.hpp"

using namespace stgcgrn;
using nlohmann::json;

namespace {

app::RunConfig parse(const std::string& text) { return app::parse_config(json::parse(text), "/data"); }

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsMaterializeInResolvedDocument) {
  auto cfg = parse(R"({"graph": {"kappa": "inf"}})");
  app::finalize(cfg, 5, 1);
  const json r = app::resolved_json(cfg);
  EXPECT_EQ(r["data"]["S"], 3);
  EXPECT_EQ(r["data"]["P"], 12);
  EXPECT_EQ(r["data"]["Q"], 12);
  EXPECT_EQ(r["data"]["L"], 15);
  EXPECT_EQ(r["model"]["n_head"], 8);
  EXPECT_EQ(r["model"]["w_pre"].get<double>(), 0.1);
  EXPECT_EQ(r["model"]["w_adp"].get<double>(), 0.9);
  EXPECT_EQ(r["model"]["attention_candidates"], 14);
  EXPECT_EQ(r["model"]["block_len"], 27);
  EXPECT_EQ(r["train"]["learning_rate"].get<double>(), 0.001);
  EXPECT_EQ(r["train"]["batch_size"], 16);
  EXPECT_EQ(r["train"]["seeds"], json({1, 2, 3, 4, 5}));
  EXPECT_EQ(r["graph"]["kappa"], "inf");
  EXPECT_EQ(r["data"]["samples_per_week"], 2016);
  // No placeholders: every leaf is a concrete value.
  std::function<void(const json&)> walk = [&](const json& j) {
    if (j.is_structured())
      for (const auto& v : j) walk(v);
    else
      EXPECT_FALSE(j.is_null());
  };
  walk(r);
}

TEST(Config, ResolvedDocumentParsesBackToItself) {
  auto cfg = parse(R"({"data": {"series": "s.stgt", "edges": "e.csv", "samples_per_day": 48, "weeks": 0},
                       "graph": {"kappa": 2.5, "sigma": 0.7},
                       "model": {"ablation": "no_window", "order": "dgc_then_attention", "n_head": 2},
                       "train": {"seeds": [4, 9], "clip": false}})");
  app::finalize(cfg, 3, 1);
  const json first = app::resolved_json(cfg);
  auto again = app::parse_config(first, "/elsewhere");
  app::finalize(again, 3, 1);
  EXPECT_EQ(app::resolved_json(again), first);
  EXPECT_EQ(cfg.series_path, std::filesystem::path("/data/s.stgt"));
  EXPECT_EQ(cfg.samples_per_week, 336u);
}

TEST(Config, ErrorsNameTheFieldPath) {
  EXPECT_NE(error_of(R"({"model": {"dh": 4}})").find("model.dh"), std::string::npos);
  EXPECT_NE(error_of(R"({"train": {"batch_size": "big"}})").find("train.batch_size"), std::string::npos);
  EXPECT_NE(error_of(R"({"train": {"seeds": [1, -2]}})").find("train.seeds[1]"), std::string::npos);
  EXPECT_NE(error_of(R"({"graph": {"kappa": "huge"}})").find("graph.kappa"), std::string::npos);
  EXPECT_NE(error_of(R"({"model": {"ablation": "no_magic"}})").find("model.ablation"), std::string::npos);
  EXPECT_NE(error_of(R"({"extras": {}})").find("extras"), std::string::npos);
  EXPECT_NE(error_of(R"({"data": {"P": 0}})").find("data.P"), std::string::npos);
}

TEST(Config, KappaIsRequired) {
  auto cfg = parse("{}");
  try {
    app::finalize(cfg, 3, 1);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("graph.kappa"), std::string::npos);
  }
}

TEST(Config, FlagsOverrideDocument) {
  auto cfg = parse(R"({"graph": {"kappa": 1}, "model": {"n_head": 4}, "train": {"seeds": [1, 2]}})");
  app::Overrides o;
  o.n_head = 16;
  o.seeds = std::vector<std::uint64_t>{7};
  o.ablation = "no_period";
  app::apply_overrides(cfg, o);
  EXPECT_EQ(cfg.model.n_head, 16u);
  EXPECT_EQ(cfg.train.seeds, (std::vector<std::uint64_t>{7}));
  EXPECT_TRUE(cfg.model.ablation.no_period);
}

TEST(Config, ExitCodeClasses) {
  EXPECT_EQ(app::exit_code_for(ConfigError("x")), app::kUsage);
  EXPECT_EQ(app::exit_code_for(DataError("x")), app::kData);
  EXPECT_EQ(app::exit_code_for(ShapeError("x")), app::kData);
  EXPECT_EQ(app::exit_code_for(DivergenceError("x")), app::kDivergence);
  EXPECT_EQ(app::exit_code_for(app::CheckFailure("x")), app::kCheckFailed);
}
