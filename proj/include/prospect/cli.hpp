#pragma once

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "prospect/audit.hpp"
#include "prospect/error.hpp"
#include "prospect/io.hpp"
#include "prospect/toy.hpp"

namespace prospect::cli {

/// Maps an exception to (exit status, originating module).
inline std::pair<int, const char*> classify(const std::exception& e) {
  if (dynamic_cast<const AssumptionRefused*>(&e)) return {kExitRefused, "transport"};
  if (dynamic_cast<const IdentificationError*>(&e)) return {kExitIdentification, "transport"};
  if (dynamic_cast<const ConfigError*>(&e)) return {kExitConfig, "config"};
  if (dynamic_cast<const RowError*>(&e)) return {kExitConfig, "schema"};
  if (dynamic_cast<const SchemaError*>(&e)) return {kExitConfig, "schema"};
  if (dynamic_cast<const PolicyError*>(&e)) return {kExitConfig, "policy"};
  if (dynamic_cast<const EstimationError*>(&e)) return {kExitFailure, "estimation"};
  if (dynamic_cast<const UndefinedConditional*>(&e)) return {kExitFailure, "estimation"};
  return {kExitFailure, "internal"};
}

struct ToyOverrides {
  std::vector<std::pair<std::string, std::string>> given;  // flag name, value

  ToyParams apply() const {
    ToyParams p;
    for (const auto& [name, text] : given) {
      Rational value;
      try {
        value = Rational::parse(text);
      } catch (const std::exception&) {
        throw ConfigError("--" + name + ": '" + text + "' is not a decimal or fraction");
      }
      if (name == "p-a") p.p_a = value;
      else if (name == "p-x1-base") p.p_x1_base = value;
      else if (name == "p-x1-slope") p.p_x1_slope = value;
      else if (name == "p-x2") p.p_x2 = value;
      else if (name == "pre-rate") p.pre_rate = value;
      else if (name == "y-intercept") p.y_intercept = value;
      else if (name == "y-care") p.y_care = value;
      else if (name == "y-education") p.y_education = value;
      else if (name == "y-treatment") p.y_treatment = value;
    }
    p.validate();
    return p;
  }
};

inline void add_toy_flags(CLI::App& cmd, ToyOverrides& overrides) {
  for (std::string name : {"p-a", "p-x1-base", "p-x1-slope", "p-x2", "pre-rate", "y-intercept", "y-care",
                           "y-education", "y-treatment"})
    cmd.add_option_function<std::string>(
        "--" + name, [&overrides, name](const std::string& v) { overrides.given.emplace_back(name, v); },
        "override the toy model parameter (decimal or p/q)");
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw ConfigError("failed writing '" + path.string() + "'");
}

inline void emit(const std::string& content, const std::optional<std::filesystem::path>& out,
                 std::ostream& stdout_stream) {
  if (out)
    write_text_file(*out, content);
  else
    stdout_stream << content;
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

struct ConfigFlags {
  std::string config;
  std::optional<std::string> mode;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

inline void add_config_flags(CLI::App& cmd, ConfigFlags& f) {
  cmd.add_option("--config", f.config, "run configuration (JSON)")->required();
  cmd.add_option("--mode", f.mode, "strict or permissive (overrides the config)");
  cmd.add_option("--out", f.out, "report path (default: standard output)");
  cmd.add_option("--format", f.format, "json or text (overrides the config)");
}

inline RunConfig resolve(const ConfigFlags& f) {
  auto cfg = load_config(f.config);
  if (f.mode) cfg.mode = mode_from_string(*f.mode);
  if (f.format) cfg.format = format_from_string(*f.format);
  if (f.out) cfg.output = std::filesystem::path(*f.out);
  return cfg;
}

// --- subcommands -----------------------------------------------------------

inline int simulate(const ToyOverrides& overrides, std::size_t n, std::uint64_t seed, const std::string& policy,
                    const std::string& out, std::ostream& log) {
  const auto params = overrides.apply();
  std::optional<TabularPolicy> post;
  if (policy == "flemish") post = toy::paper_policies().flemish;
  else if (policy == "austrian") post = toy::paper_policies().austrian;
  else if (policy != "none") throw ConfigError("--policy must be none, flemish or austrian");

  const auto data = post ? toy::sample_post(params, *post, n, seed) : toy::sample_pre(params, n, seed);
  {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + out + "'");
    write_csv(f, data);
  }
  nlohmann::json sidecar = {
      {"file", std::filesystem::path(out).filename().string()},
      {"rows", n},
      {"seed", seed},
      {"generator", "std::mt19937_64"},
      {"bernoulli", "u = (next() >> 11) * 2^-53; draw is u < p"},
      {"draw_order", {"A", "X1", "X2", "D", "Y"}},
      {"provenance", std::string(to_string(data.provenance()))},
      {"policy", policy},
      {"params", io::to_json(params)},
  };
  write_text_file(out + ".provenance.json", dump(sidecar));
  log << "wrote " << n << " rows to " << out << "\n";
  return kExitOk;
}

inline void require_policies(const RunConfig& cfg, std::size_t at_least, const std::string& command) {
  if (cfg.policies.size() < at_least)
    throw ConfigError(command + " needs at least " + std::to_string(at_least) + " candidate polic" +
                      (at_least == 1 ? "y" : "ies") + " in the config");
}

inline int audit(const RunConfig& cfg, std::ostream& out) {
  require_policies(cfg, 1, "audit");
  const auto run = run_audit(cfg, load_data(cfg));
  emit(cfg.format == OutputFormat::json ? dump(to_json(run)) : render_text(run), cfg.output, out);
  return run.exit_status();
}

inline int check(const RunConfig& cfg, std::ostream& out) {
  require_policies(cfg, 1, "check");
  const auto run = run_audit(cfg, load_data(cfg));
  int status = kExitOk;
  nlohmann::json reports = nlohmann::json::array();
  std::ostringstream text;
  for (const auto& p : run.policies) {
    if (!p.assumptions.pass()) status = kExitRefused;
    reports.push_back({{"label", p.label}, {"assumptions", io::to_json(p.assumptions)}});
    text << p.label << ": " << (p.assumptions.pass() ? "pass" : "fail") << "\n";
    for (const auto& v : p.assumptions.violations)
      text << "  unprecedented decision " << v.decision << " at " << describe(v.cell) << "\n";
    for (const auto& g : p.assumptions.zero_mass_groups) text << "  group " << g << " has zero mass\n";
  }
  const nlohmann::json j = {{"pre_policy", run.pre_policy_source}, {"policies", reports}, {"exit_status", status}};
  emit(cfg.format == OutputFormat::json ? dump(j) : text.str(), cfg.output, out);
  return status;
}

inline int compare(const RunConfig& cfg, std::ostream& out) {
  require_policies(cfg, 2, "compare");
  const auto run = run_audit(cfg, load_data(cfg));
  if (cfg.format == OutputFormat::text) {
    emit(render_text(run), cfg.output, out);
  } else {
    nlohmann::json rows = nlohmann::json::array();
    rows.push_back({{"label", "pre"}, {"status", "observed"}, {"metrics", io::to_json(run.pre)}});
    for (const auto& p : run.policies) {
      nlohmann::json row = {{"label", p.label}, {"status", p.status}};
      row["metrics"] = p.metrics ? io::to_json(*p.metrics) : nlohmann::json(nullptr);
      row["deltas"] = p.metrics ? deltas(*p.metrics, run.pre) : nlohmann::json(nullptr);
      rows.push_back(std::move(row));
    }
    emit(dump({{"mode", std::string(to_string(run.mode))}, {"regimes", rows}}), cfg.output, out);
  }
  return run.exit_status();
}

inline int reproduce_toy(const ToyOverrides& overrides, const std::string& format,
                         const std::optional<std::string>& out, std::ostream& stream) {
  const auto fmt = format_from_string(format);
  const auto rows = reproduce_toy(overrides.apply());
  std::optional<std::filesystem::path> path;
  if (out) path = *out;
  emit(fmt == OutputFormat::json ? dump(to_json(rows)) : render_text(rows), path, stream);
  return kExitOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Prospective fairness audits of decision policies"};
  app.require_subcommand(1);

  ToyOverrides sim_toy, repro_toy;
  std::size_t n = 1'000'000;
  std::uint64_t seed = 7;
  std::string policy = "none";
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "draw a toy-model sample to CSV");
  sim->add_option("--n", n, "rows to draw")->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "generator seed");
  sim->add_option("--policy", policy, "none (pre world), flemish or austrian");
  sim->add_option("--out", sim_out, "CSV path")->required();
  add_toy_flags(*sim, sim_toy);

  ConfigFlags audit_flags, check_flags, compare_flags;
  auto* aud = app.add_subcommand("audit", "predict post-deployment inequality for each candidate policy");
  add_config_flags(*aud, audit_flags);
  auto* chk = app.add_subcommand("check", "run only the assumption checks");
  add_config_flags(*chk, check_flags);
  auto* cmp = app.add_subcommand("compare", "side-by-side metrics for two or more policies");
  add_config_flags(*cmp, compare_flags);

  std::string repro_format = "text";
  std::optional<std::string> repro_out;
  auto* rep = app.add_subcommand("reproduce-toy", "print the analytic toy-model results table");
  rep->add_option("--format", repro_format, "json or text");
  rep->add_option("--out", repro_out, "output path (default: standard output)");
  add_toy_flags(*rep, repro_toy);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) return simulate(sim_toy, n, seed, policy, sim_out, err);
    if (aud->parsed()) return audit(resolve(audit_flags), out);
    if (chk->parsed()) return check(resolve(check_flags), out);
    if (cmp->parsed()) return compare(resolve(compare_flags), out);
    return reproduce_toy(repro_toy, repro_format, repro_out, out);
  } catch (const std::exception& e) {
    const auto [status, module] = classify(e);
    err << "error [" << module << "]: " << e.what() << "\n";
    return status;
  }
}

}  // namespace prospect::cli
