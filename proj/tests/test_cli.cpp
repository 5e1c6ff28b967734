#include <gtest/gtest.h>

#include <cstdlib>
#include <regex>
#include <sstream>

#include "helpers.hpp"
#include "prospect/cli.hpp"

using namespace prospect;
using nlohmann::json;
using testing_support::slurp;
using testing_support::spit;
using testing_support::TempDir;

namespace {

struct Outcome {
  int status;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "prospect");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

json toy_config(const std::string& data, json policies) {
  return {{"schema", io::to_json(toy::schema())}, {"data", {{"path", data}}}, {"policies", std::move(policies)}};
}

json presets() {
  return json::array({{{"label", "flemish"}, {"kind", "preset"}, {"name", "flemish"}},
                      {{"label", "austrian"}, {"kind", "preset"}, {"name", "austrian"}}});
}

// Shared seed-7 pre-deployment sample of one million rows.
class CliAudit : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    const auto r = run({"simulate", "--n", "1000000", "--seed", "7", "--out", (*dir_ / "pre.csv").string()});
    ASSERT_EQ(r.status, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string write_config(const std::string& name, const json& cfg) {
    const auto path = *dir_ / name;
    spit(path, cfg.dump(2));
    return path.string();
  }
  static TempDir* dir_;
};

TempDir* CliAudit::dir_ = nullptr;

}  // namespace

TEST(Cli, ReproduceToyTable) {
  const auto r = run({"reproduce-toy"});
  ASSERT_EQ(r.status, 0);
  EXPECT_TRUE(std::regex_search(r.out, std::regex("pre\\s+0\\.560000\\s+0\\.440000\\s+0\\.120000\\s+0\\.500000")));
  EXPECT_TRUE(std::regex_search(r.out, std::regex("flemish\\s+0\\.520000\\s+0\\.480000\\s+0\\.040000\\s+0\\.500000")));
  EXPECT_TRUE(
      std::regex_search(r.out, std::regex("austrian\\s+0\\.581333\\s+0\\.408000\\s+0\\.173333\\s+0\\.494667")));
  const auto j = json::parse(run({"reproduce-toy", "--format", "json"}).out);
  EXPECT_EQ(j[2]["exact"]["p_y1_a1"], "218/375");
}

TEST(Cli, ReproduceToyWithOverrides) {
  const auto r = run({"reproduce-toy", "--format", "json", "--pre-rate", "0"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NEAR(json::parse(r.out)[0]["overall"].get<double>(), 0.58, 1e-12);
  const auto bad = run({"reproduce-toy", "--y-care", "0.9"});
  EXPECT_EQ(bad.status, kExitConfig);
  EXPECT_NE(bad.err.find("[config]"), std::string::npos);
}

TEST(Cli, SimulateWritesCsvAndSidecar) {
  TempDir dir;
  const auto out = (dir / "post.csv").string();
  const auto r = run({"simulate", "--n", "1000", "--seed", "3", "--policy", "flemish", "--out", out});
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream csv(slurp(out));
  const auto data = ingest_csv(csv, toy::schema());
  EXPECT_EQ(data.size(), 1000u);
  const auto flemish = toy::sample_post(ToyParams{}, toy::paper_policies().flemish, 1000, 3);
  EXPECT_TRUE(std::equal(data.codes().begin(), data.codes().end(), flemish.codes().begin()));
  const auto side = json::parse(slurp(out + ".provenance.json"));
  EXPECT_EQ(side["seed"], 3);
  EXPECT_EQ(side["policy"], "flemish");
  EXPECT_EQ(side["provenance"], "post-simulated");
  EXPECT_EQ(side["params"]["pre_rate"], "2/5");
}

TEST(Cli, SimulateRejectsInvalidParametersBeforeSampling) {
  TempDir dir;
  const auto out = dir / "pre.csv";
  const auto r = run({"simulate", "--n", "10", "--y-intercept", "0.95", "--out", out.string()});
  EXPECT_EQ(r.status, kExitConfig);
  EXPECT_FALSE(std::filesystem::exists(out));
  EXPECT_EQ(run({"simulate", "--n", "10", "--policy", "danish", "--out", out.string()}).status, kExitConfig);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).status, kExitConfig);
  EXPECT_EQ(run({"audit"}).status, kExitConfig);
  EXPECT_EQ(run({"frobnicate"}).status, kExitConfig);
  EXPECT_EQ(run({"--help"}).status, kExitOk);
}

TEST_F(CliAudit, HeadlineGapsFromTheStatisticalPipeline) {
  const auto cfg = write_config("audit.json", toy_config("pre.csv", presets()));
  const auto r = run({"audit", "--config", cfg});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["pre"]["gap"].get<double>(), 0.12, 0.01);
  std::map<std::string, json> by_label;
  for (const auto& p : j["policies"]) by_label[p["label"]] = p;
  EXPECT_EQ(j["policies"][0]["label"], "austrian");
  EXPECT_NEAR(by_label["flemish"]["metrics"]["gap"].get<double>(), 0.04, 0.01);
  EXPECT_NEAR(by_label["austrian"]["metrics"]["gap"].get<double>(), 0.17, 0.01);
  EXPECT_NEAR(by_label["austrian"]["deltas"]["gap"].get<double>(),
              by_label["austrian"]["metrics"]["gap"].get<double>() - j["pre"]["gap"].get<double>(), 1e-15);
  EXPECT_EQ(by_label["flemish"]["assumptions"]["verdict"], "pass");
  EXPECT_EQ(j["exit_status"], 0);
}

TEST_F(CliAudit, ReportsAreByteIdenticalAcrossRuns) {
  const auto cfg = write_config("repeat.json", toy_config("pre.csv", presets()));
  const auto a = (*dir_ / "a.json").string(), b = (*dir_ / "b.json").string();
  ASSERT_EQ(run({"audit", "--config", cfg, "--out", a}).status, 0);
  ASSERT_EQ(run({"audit", "--config", cfg, "--out", b}).status, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_FALSE(slurp(a).empty());
}

TEST_F(CliAudit, TextAndJsonAgreeToPrintedPrecision) {
  const auto cfg = write_config("both.json", toy_config("pre.csv", presets()));
  const auto j = json::parse(run({"audit", "--config", cfg}).out);
  const auto text = run({"audit", "--config", cfg, "--format", "text"}).out;
  auto six = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& p : j["policies"]) {
    const auto& m = p["metrics"];
    const std::string line = p["label"].get<std::string>() + "\\s+" + six(m["group_rates"]["1"]) + "\\s+" +
                             six(m["group_rates"]["0"]) + "\\s+" + six(m["gap"]) + "\\s+" + six(m["overall"]);
    EXPECT_TRUE(std::regex_search(text, std::regex(line))) << line << "\n" << text;
  }
}

TEST_F(CliAudit, StrictRefusalListsCellsAndPermissiveDisclosesGap) {
  auto cfg = toy_config("pre.csv", json::array({{{"label", "random"}, {"kind", "random"}, {"rate", 0.4}}}));
  // Decisions observed so far follow the care-obligation rule.
  TempDir local;
  const auto flemish = toy::sample_post(ToyParams{}, toy::paper_policies().flemish, 100'000, 9);
  {
    std::ofstream f(local / "flemish.csv");
    write_csv(f, flemish);
  }
  cfg["data"]["path"] = (local / "flemish.csv").string();
  const auto path = write_config("refuse.json", cfg);

  const auto strict = run({"audit", "--config", path});
  EXPECT_EQ(strict.status, kExitRefused);
  const auto js = json::parse(strict.out);
  const auto& p = js["policies"][0];
  EXPECT_EQ(p["status"], "refused");
  EXPECT_EQ(p["assumptions"]["verdict"], "fail");
  EXPECT_EQ(p["assumptions"]["support_violations"].size(), 8u);
  EXPECT_TRUE(p["metrics"].is_null());

  const auto permissive = run({"audit", "--config", path, "--mode", "permissive"});
  EXPECT_EQ(permissive.status, kExitOk);
  const auto jp = json::parse(permissive.out);
  const auto& q = jp["policies"][0];
  EXPECT_EQ(q["status"], "partial");
  EXPECT_NEAR(q["transport"]["groups"]["1"]["identification_gap"].get<double>(), 0.52, 0.01);
  EXPECT_NEAR(q["transport"]["groups"]["0"]["identification_gap"].get<double>(), 0.44, 0.01);

  const auto check = run({"check", "--config", path});
  EXPECT_EQ(check.status, kExitRefused);
  EXPECT_EQ(json::parse(check.out)["policies"][0]["assumptions"]["verdict"], "fail");
}

TEST_F(CliAudit, CheckPassesForThePrePolicyItself) {
  auto cfg = toy_config("pre.csv", json::array({{{"label", "same"}, {"kind", "random"}, {"rate", 0.4}}}));
  cfg["pre_policy"] = {{"label", "pre"}, {"kind", "random"}, {"rate", 0.4}};
  const auto r = run({"check", "--config", write_config("check.json", cfg), "--format", "text"});
  EXPECT_EQ(r.status, kExitOk) << r.err;
  EXPECT_NE(r.out.find("same: pass"), std::string::npos);
}

TEST_F(CliAudit, CompareNeedsTwoPolicies) {
  const auto none = write_config("none.json", toy_config("pre.csv", json::array()));
  EXPECT_EQ(run({"compare", "--config", none}).status, kExitConfig);
  EXPECT_EQ(run({"audit", "--config", none}).status, kExitConfig);
  const auto one = write_config(
      "one.json", toy_config("pre.csv", json::array({{{"label", "r"}, {"kind", "random"}, {"rate", 0.4}}})));
  EXPECT_EQ(run({"compare", "--config", one}).status, kExitConfig);
  const auto two = write_config("two.json", toy_config("pre.csv", presets()));
  const auto r = run({"compare", "--config", two});
  ASSERT_EQ(r.status, kExitOk);
  EXPECT_EQ(json::parse(r.out)["regimes"].size(), 3u);
}

TEST_F(CliAudit, BadInputsMapToConfigStatus) {
  const auto missing = write_config("missing.json", toy_config("nope.csv", presets()));
  EXPECT_EQ(run({"audit", "--config", missing}).status, kExitConfig);
  spit(*dir_ / "bad.csv", "A,X1,X2,D,Y\n0,1,0,1,0\n1,0,3,0,1\n");
  const auto bad = write_config("bad.json", toy_config("bad.csv", presets()));
  const auto r = run({"audit", "--config", bad});
  EXPECT_EQ(r.status, kExitConfig);
  EXPECT_NE(r.err.find("row 2"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("[schema]"), std::string::npos) << r.err;
}

TEST(CliBinary, RunsAsAProcess) {
  EXPECT_EQ(std::system((std::string(PROSPECT_CLI) + " reproduce-toy > /dev/null").c_str()), 0);
  const int status = std::system((std::string(PROSPECT_CLI) + " check 2> /dev/null").c_str());
  EXPECT_EQ(WEXITSTATUS(status), kExitConfig);
}

TEST(CliBinary, SampleConfigParses) {
  EXPECT_NO_THROW(load_config(std::filesystem::path(PROSPECT_SAMPLES) / "toy_audit.json"));
}
