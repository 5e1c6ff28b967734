#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace prospect;
using nlohmann::json;

namespace {

json toy_schema_json() { return io::to_json(toy::schema()); }

json base_config() {
  return {{"schema", toy_schema_json()},
          {"data", "pre.csv"},
          {"policies", json::array({{{"label", "flemish"}, {"kind", "preset"}, {"name", "flemish"}}})}};
}

}  // namespace

TEST(Io, NumbersAcceptDecimalsAndFractions) {
  EXPECT_EQ(io::number(json(0.25), "x"), 0.25);
  EXPECT_EQ(io::number(json("0.25"), "x"), 0.25);
  EXPECT_EQ(io::number(json("2/3"), "x"), 2.0 / 3.0);
  EXPECT_THROW(io::number(json("two"), "x"), ConfigError);
  EXPECT_THROW(io::number(json(true), "x"), ConfigError);
}

TEST(Io, SchemaRoundTrip) {
  const auto s = toy::schema();
  EXPECT_TRUE(io::schema_from_json(io::to_json(s)) == s);
  json bad = toy_schema_json();
  bad["variables"][0]["role"] = "decision";
  EXPECT_THROW(io::schema_from_json(bad), ConfigError);
  json ints = {{"variables",
                {{{"name", "A"}, {"role", "sensitive"}, {"levels", {0, 1}}},
                 {{"name", "D"}, {"role", "decision"}, {"levels", {0, 1}}},
                 {{"name", "Y"}, {"role", "outcome"}, {"levels", {0, 1}}}}}};
  EXPECT_EQ(io::schema_from_json(ints)[0].levels, (std::vector<std::string>{"0", "1"}));
}

TEST(Io, RiskModelRoundTripIsBitExact) {
  const auto m = fit_logistic(toy::sample_pre(ToyParams{}, 50'000, 3), {"A", "X1", "X2"}, "Y");
  const auto j = io::to_json(m);
  EXPECT_TRUE(j["intercept"].is_string());
  const auto back = io::risk_model_from_json(json::parse(j.dump()));
  EXPECT_EQ(back.intercept(), m.intercept());
  EXPECT_EQ(back.coefficients(), m.coefficients());
  EXPECT_EQ(back.diagnostics().iterations, m.diagnostics().iterations);
  // A deserialized model still scores the schema's cells.
  EXPECT_EQ(cell_scores(back, toy::schema().cell_variables()), cell_scores(m, toy::schema().cell_variables()));
}

TEST(Io, RiskModelRejectsMissingOrUnknownCoefficients) {
  json j = io::to_json(RiskModel(toy::schema().cell_variables(), 0.1, {0.2, 0.3, 0.4}));
  json missing = j;
  missing["coefficients"].erase(1);
  EXPECT_THROW(io::risk_model_from_json(missing), ConfigError);
  json unknown = j;
  unknown["coefficients"][0]["level"] = "7";
  EXPECT_THROW(io::risk_model_from_json(unknown), ConfigError);
}

TEST(Io, TabularPolicyRoundTrip) {
  const auto s = toy::schema();
  const auto austrian = toy::paper_policies().austrian;
  const auto j = io::to_json(austrian);
  ASSERT_EQ(j["rows"].size(), 16u);
  const auto back = io::tabular_from_json(j["rows"], s, "copy");
  for (std::size_t c = 0; c < 8; ++c)
    for (Level d = 0; d < 2; ++d) EXPECT_EQ(back.prob(c, d), austrian.prob(c, d));
}

TEST(Io, TabularPolicyNeedsEveryCell) {
  auto rows = io::to_json(toy::paper_policies().flemish)["rows"];
  rows.erase(rows.begin(), rows.begin() + 2);
  EXPECT_THROW(io::tabular_from_json(rows, toy::schema(), "x"), ConfigError);
}

TEST(Io, PolicySpecKinds) {
  const auto s = toy::schema();
  const auto random = io::policy_spec_from_json({{"label", "r"}, {"kind", "random"}, {"rate", "2/5"}}, s);
  EXPECT_EQ(std::get<RandomSpec>(random.kind).rate, 0.4);
  const auto threshold = io::policy_spec_from_json({{"label", "t"}, {"kind", "threshold"}, {"q", 0.6}}, s);
  EXPECT_TRUE(std::get<ThresholdSpec>(threshold.kind).treat_above);
  const auto band = io::policy_spec_from_json(
      {{"label", "b"}, {"kind", "band"}, {"q_low", 0.3}, {"q_high", 0.7}, {"thinning", "2/3"}}, s);
  EXPECT_EQ(std::get<BandSpec>(band.kind).thinning, 2.0 / 3.0);
  const auto preset = io::policy_spec_from_json({{"label", "p"}, {"kind", "preset"}, {"name", "austrian"}}, s);
  EXPECT_EQ(std::get<TableSpec>(preset.kind).table.label(), "p");
}

TEST(Io, PolicySpecErrors) {
  const auto s = toy::schema();
  EXPECT_THROW(io::policy_spec_from_json({{"label", "r"}, {"kind", "random"}, {"rate", 1.4}}, s), ConfigError);
  EXPECT_THROW(io::policy_spec_from_json({{"label", "x"}, {"kind", "lottery"}}, s), ConfigError);
  EXPECT_THROW(io::policy_spec_from_json({{"kind", "random"}, {"rate", 0.1}}, s), ConfigError);
  EXPECT_THROW(io::policy_spec_from_json({{"label", "b"}, {"kind", "band"}, {"q_low", 0.7}, {"q_high", 0.3}}, s),
               ConfigError);
  EXPECT_THROW(io::policy_spec_from_json({{"label", "p"}, {"kind", "preset"}, {"name", "danish"}}, s), ConfigError);
  const Schema other({{"A", Role::sensitive, {"0", "1"}}, {"D", Role::decision, {"0", "1"}},
                      {"Y", Role::outcome, {"0", "1"}}});
  EXPECT_THROW(io::policy_spec_from_json({{"label", "p"}, {"kind", "preset"}, {"name", "flemish"}}, other),
               ConfigError);
}

TEST(Config, DefaultsAndOverrides) {
  const auto cfg = parse_config(base_config(), "/data");
  EXPECT_EQ(cfg.data_path, std::filesystem::path("/data/pre.csv"));
  EXPECT_EQ(cfg.mode, Mode::strict);
  EXPECT_EQ(cfg.format, OutputFormat::json);
  EXPECT_FALSE(cfg.declared_pre.has_value());
  EXPECT_EQ(cfg.metrics.outcome_level, "1");
  EXPECT_EQ(cfg.metrics.group_1, "1");
  EXPECT_EQ(cfg.metrics.group_0, "0");

  auto j = base_config();
  j["mode"] = "permissive";
  j["metrics"] = {{"outcome_level", "0"}, {"group_1", "0"}, {"group_0", "1"}};
  j["pre_policy"] = {{"label", "pre"}, {"kind", "random"}, {"rate", 0.4}};
  j["estimation"] = {{"smoothing", 0.5}};
  const auto c2 = parse_config(j, "/data");
  EXPECT_EQ(c2.mode, Mode::permissive);
  EXPECT_EQ(c2.metrics.group_1, "0");
  EXPECT_TRUE(c2.declared_pre.has_value());
  EXPECT_EQ(c2.smoothing, 0.5);
}

TEST(Config, Rejections) {
  auto dup = base_config();
  dup["policies"].push_back({{"label", "flemish"}, {"kind", "random"}, {"rate", 0.4}});
  EXPECT_THROW(parse_config(dup, "."), ConfigError);

  auto mode = base_config();
  mode["mode"] = "lenient";
  EXPECT_THROW(parse_config(mode, "."), ConfigError);

  auto level = base_config();
  level["metrics"] = {{"outcome_level", "2"}};
  EXPECT_THROW(parse_config(level, "."), ConfigError);

  auto same = base_config();
  same["metrics"] = {{"group_1", "0"}, {"group_0", "0"}};
  EXPECT_THROW(parse_config(same, "."), ConfigError);

  auto feature = base_config();
  feature["model"] = {{"features", {"D"}}};
  EXPECT_THROW(parse_config(feature, "."), ConfigError);

  auto smoothing = base_config();
  smoothing["estimation"] = {{"smoothing", -1}};
  EXPECT_THROW(parse_config(smoothing, "."), ConfigError);

  auto pre = base_config();
  pre["pre_policy"] = "observed";
  EXPECT_THROW(parse_config(pre, "."), ConfigError);

  EXPECT_THROW(parse_config(json::array(), "."), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, PinnedModelFromFile) {
  testing_support::TempDir dir;
  const auto m = RiskModel(toy::schema().cell_variables(), -0.3, {0.0, 1.3, -0.9});
  testing_support::spit(dir / "model.json", io::to_json(m).dump());
  auto j = base_config();
  j["model"] = {{"path", "model.json"}};
  const auto cfg = parse_config(j, dir.path());
  ASSERT_TRUE(cfg.pinned_model);
  EXPECT_EQ(cfg.pinned_model->coefficients(), m.coefficients());
}
