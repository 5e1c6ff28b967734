#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "prospect/error.hpp"
#include "prospect/estimation.hpp"
#include "prospect/io.hpp"
#include "prospect/joint_table.hpp"
#include "prospect/metrics.hpp"
#include "prospect/policy.hpp"
#include "prospect/schema.hpp"
#include "prospect/toy.hpp"
#include "prospect/transport.hpp"

namespace prospect {

/// Process exit statuses of the command-line tool.
enum ExitStatus : int {
  kExitOk = 0,
  kExitFailure = 1,           // estimation or other runtime failure
  kExitConfig = 2,            // invalid configuration, schema or input data
  kExitIdentification = 3,    // a needed pre-deployment quantity is not identified
  kExitRefused = 4,           // strict mode refused a policy that fails the support check
};

enum class OutputFormat { json, text };

struct RunConfig {
  Schema schema;
  std::filesystem::path data_path;
  CsvOptions csv;
  std::optional<PolicySpec> declared_pre;  // nullopt: estimate from the data
  std::vector<PolicySpec> policies;
  MetricSettings metrics;
  double smoothing = 0.0;
  std::vector<std::string> risk_features;  // empty: sensitive + covariates
  LogisticOptions logistic;
  std::shared_ptr<const RiskModel> pinned_model;
  Mode mode = Mode::strict;
  std::optional<std::filesystem::path> output;
  OutputFormat format = OutputFormat::json;
};

inline Mode mode_from_string(const std::string& s) {
  if (s == "strict") return Mode::strict;
  if (s == "permissive") return Mode::permissive;
  throw ConfigError("mode must be strict or permissive, got '" + s + "'");
}

inline OutputFormat format_from_string(const std::string& s) {
  if (s == "json") return OutputFormat::json;
  if (s == "text") return OutputFormat::text;
  throw ConfigError("format must be json or text, got '" + s + "'");
}

/// Parses a run configuration; relative paths resolve against `base`.
inline RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base) {
  using io::member;
  using io::text;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg{io::schema_from_json(member(j, "schema", "config")), {}, {}, {}, {}, {}, {}, {}, {},
                {}, Mode::strict, {}, OutputFormat::json};
  const auto& schema = cfg.schema;

  const auto& data = member(j, "data", "config");
  if (data.is_string()) {
    cfg.data_path = base / data.get<std::string>();
  } else {
    cfg.data_path = base / text(data, "path", "data");
    if (data.contains("columns"))
      for (const auto& [var, col] : data.at("columns").items()) {
        if (!schema.find(var)) throw ConfigError("data.columns: unknown variable '" + var + "'");
        cfg.csv.column_map[var] = col.get<std::string>();
      }
    const auto bad = data.value("on_bad_row", std::string("abort"));
    if (bad != "abort" && bad != "skip") throw ConfigError("data.on_bad_row must be abort or skip");
    cfg.csv.on_bad_row = bad == "skip" ? BadRowAction::skip : BadRowAction::abort;
  }

  if (j.contains("pre_policy")) {
    const auto& pre = j.at("pre_policy");
    if (pre.is_string()) {
      if (pre.get<std::string>() != "empirical")
        throw ConfigError("pre_policy must be \"empirical\" or a policy declaration");
    } else {
      cfg.declared_pre = io::policy_spec_from_json(pre, schema, base);
    }
  }

  if (j.contains("policies")) {
    const auto& pols = j.at("policies");
    if (!pols.is_array()) throw ConfigError("policies must be a list");
    std::set<std::string> labels;
    for (const auto& p : pols) {
      auto spec = io::policy_spec_from_json(p, schema, base);
      if (!labels.insert(spec.label).second)
        throw ConfigError("duplicate policy label '" + spec.label + "'");
      cfg.policies.push_back(std::move(spec));
    }
  }

  const auto& outcome = schema[schema.outcome()];
  const auto& group = schema[schema.sensitive()];
  if (outcome.cardinality() == 2) cfg.metrics.outcome_level = outcome.levels[1];
  cfg.metrics.group_1 = group.levels.size() > 1 ? group.levels[1] : group.levels[0];
  cfg.metrics.group_0 = group.levels[0];
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    cfg.metrics.outcome_level = m.value("outcome_level", cfg.metrics.outcome_level);
    cfg.metrics.group_1 = m.value("group_1", cfg.metrics.group_1);
    cfg.metrics.group_0 = m.value("group_0", cfg.metrics.group_0);
  }
  if (!outcome.find_level(cfg.metrics.outcome_level))
    throw ConfigError("metrics.outcome_level '" + cfg.metrics.outcome_level + "' is not a level of " +
                      outcome.name);
  for (const auto* g : {&cfg.metrics.group_1, &cfg.metrics.group_0})
    if (!group.find_level(*g))
      throw ConfigError("metrics group '" + *g + "' is not a level of " + group.name);
  if (cfg.metrics.group_1 == cfg.metrics.group_0)
    throw ConfigError("metrics.group_1 and metrics.group_0 must differ");

  if (j.contains("estimation")) {
    const auto& e = j.at("estimation");
    if (e.contains("smoothing")) cfg.smoothing = io::number(e.at("smoothing"), "estimation.smoothing");
    if (!(cfg.smoothing >= 0.0)) throw ConfigError("estimation.smoothing must be non-negative");
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (m.contains("features"))
      for (const auto& f : m.at("features")) {
        const auto name = f.get<std::string>();
        const auto idx = schema.find(name);
        if (!idx) throw ConfigError("model.features: unknown variable '" + name + "'");
        const auto role = schema[*idx].role;
        if (role != Role::sensitive && role != Role::covariate)
          throw ConfigError("model.features: '" + name + "' is not a sensitive or covariate variable");
        cfg.risk_features.push_back(name);
      }
    if (m.contains("tol")) cfg.logistic.tol = io::number(m.at("tol"), "model.tol");
    if (m.contains("max_iter")) cfg.logistic.max_iter = m.at("max_iter").get<int>();
    if (m.contains("path")) cfg.pinned_model = io::model_reference(m.at("path"), base);
    if (m.contains("inline")) cfg.pinned_model = io::model_reference(m.at("inline"), base);
  }

  if (j.contains("mode")) cfg.mode = mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("output")) {
    const auto& o = j.at("output");
    if (o.contains("path")) cfg.output = base / o.at("path").get<std::string>();
    if (o.contains("format")) cfg.format = format_from_string(o.at("format").get<std::string>());
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  const auto j = io::read_json_file(path);
  try {
    return parse_config(j, path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
}

inline Dataset load_data(const RunConfig& cfg) {
  std::ifstream in(cfg.data_path);
  if (!in) throw ConfigError("cannot open data file '" + cfg.data_path.string() + "'");
  return ingest_csv(in, cfg.schema, cfg.csv);
}

// ---------------------------------------------------------------------------

struct PolicyEvaluation {
  std::string label;
  std::string status;  // ok | partial | refused | unidentified
  std::string message;
  std::optional<TabularPolicy> policy;
  double treated_share = 0.0;
  AssumptionReport assumptions;
  std::optional<TransportResult> transport;
  std::optional<RegimeMetrics> metrics;
};

struct AuditRun {
  Mode mode = Mode::strict;
  std::size_t rows = 0;
  MetricSettings settings;
  std::shared_ptr<const RiskModel> model;
  std::string model_note;
  /// Score R behind the sufficiency and separation diagnostics: a logistic
  /// risk over the covariates alone, so score levels are shared by groups.
  std::shared_ptr<const RiskModel> diagnostic_model;
  std::string pre_policy_source;
  RegimeMetrics pre;
  std::vector<PolicyEvaluation> policies;

  int exit_status() const {
    int status = kExitOk;
    for (const auto& p : policies) {
      if (p.status == "unidentified") return kExitIdentification;
      if (p.status == "refused") status = kExitRefused;
    }
    return status;
  }
};

namespace detail {

inline std::vector<std::string> default_features(const Schema& schema) {
  return names_of(schema.cell_variables());
}

// Score of an (a, x) cell, looked up from a joint whose leading variables
// are (A, X...).
inline std::function<double(std::span<const Level>)> cell_score_fn(const RiskModel& model,
                                                                   const Schema& schema) {
  const auto cell_vars = schema.cell_variables();
  auto scores = std::make_shared<std::vector<double>>(cell_scores(model, cell_vars));
  auto radix = std::make_shared<MixedRadix>(cardinalities(cell_vars));
  const std::size_t k = cell_vars.size();
  return [scores, radix, k](std::span<const Level> digits) {
    return (*scores)[radix->encode(digits.first(k))];
  };
}

inline void attach_diagnostics(RegimeMetrics& m, const JointTable& full, const Schema& schema,
                               const RiskModel* model) {
  const auto a = schema[schema.sensitive()].name;
  const auto d = schema[schema.decision()].name;
  const auto y = schema[schema.outcome()].name;
  try {
    m.decision_independence_gap = independence_gap(full.marginal({a, d}));
  } catch (const UndefinedConditional&) {
  }
  if (!model) return;
  const auto ary = score_joint(full, a, y, cell_score_fn(*model, schema));
  m.sufficiency = sufficiency(ary);
  m.separation = separation(ary);
}

inline JointTable full_order_joint(const JointTable& t, const Schema& schema) {
  std::vector<std::string> order = names_of(schema.cell_variables());
  order.push_back(schema[schema.decision()].name);
  order.push_back(schema[schema.outcome()].name);
  return t.marginal(order);
}

}  // namespace detail

/// Evaluates every candidate policy against the pre-deployment data.
inline AuditRun run_audit(const RunConfig& cfg, const Dataset& data) {
  const auto& schema = data.schema();
  if (data.empty()) throw ConfigError("data file has no rows");
  AuditRun run;
  run.mode = cfg.mode;
  run.rows = data.size();
  run.settings = cfg.metrics;

  const auto inputs = fit_transport_inputs(data, cfg.smoothing);
  const auto a_name = schema[schema.sensitive()].name;
  const auto y_name = schema[schema.outcome()].name;

  const bool needs_model = std::any_of(cfg.policies.begin(), cfg.policies.end(), [](const PolicySpec& p) {
    if (auto* t = std::get_if<ThresholdSpec>(&p.kind)) return !t->model;
    if (auto* b = std::get_if<BandSpec>(&p.kind)) return !b->model;
    return false;
  }) || (cfg.declared_pre && is_score_based(*cfg.declared_pre));
  if (cfg.pinned_model) {
    run.model = cfg.pinned_model;
    run.model_note = "pinned";
  } else if (schema[schema.outcome()].cardinality() == 2) {
    const auto features = cfg.risk_features.empty() ? detail::default_features(schema) : cfg.risk_features;
    try {
      run.model = std::make_shared<const RiskModel>(fit_logistic(data, features, y_name, cfg.logistic));
      run.model_note = "fitted";
    } catch (const SeparationError& e) {
      if (needs_model) throw;
      run.model_note = std::string("not available: ") + e.what();
    }
  } else {
    if (needs_model) throw ConfigError("score-based policies need a binary outcome or a pinned model");
    run.model_note = "not available: outcome is not binary";
  }

  if (schema[schema.outcome()].cardinality() == 2 && !schema.covariates().empty()) {
    try {
      run.diagnostic_model = std::make_shared<const RiskModel>(
          fit_logistic(data, names_of(schema.covariate_variables()), y_name, cfg.logistic));
    } catch (const SeparationError&) {
    }
  }

  const TabularPolicy pre_policy =
      cfg.declared_pre ? realize(*cfg.declared_pre, schema, run.model.get(), inputs.group_covariates)
                       : empirical_policy(data);
  run.pre_policy_source = cfg.declared_pre ? "declared:" + cfg.declared_pre->label : "empirical";

  const auto full_pre = detail::full_order_joint(
      empirical_joint(data, names_of(schema.variables())), schema);
  run.pre = regime_metrics("pre", false, full_pre.marginal({a_name, y_name}), cfg.metrics);
  detail::attach_diagnostics(run.pre, full_pre, schema, run.diagnostic_model.get());

  std::vector<PolicySpec> ordered = cfg.policies;
  std::sort(ordered.begin(), ordered.end(),
            [](const PolicySpec& l, const PolicySpec& r) { return l.label < r.label; });
  for (const auto& spec : ordered) {
    PolicyEvaluation ev;
    ev.label = spec.label;
    ev.policy = realize(spec, schema, run.model.get(), inputs.group_covariates);
    ev.treated_share = treated_share(*ev.policy, inputs.group_covariates);
    ev.assumptions = check_assumptions(pre_policy, inputs.group_covariates, *ev.policy);
    try {
      ev.transport = transport(inputs, *ev.policy, cfg.mode);
      if (complete(*ev.transport)) {
        ev.status = "ok";
        const auto full = predicted_full_joint(*ev.transport, inputs.group);
        RegimeMetrics m =
            regime_metrics(spec.label, true, predicted_joint(*ev.transport, inputs.group), cfg.metrics);
        detail::attach_diagnostics(m, full, schema, run.diagnostic_model.get());
        ev.metrics = std::move(m);
      } else {
        ev.status = "partial";
        ev.message = "some post-policy mass is not identified; inequality metrics withheld";
      }
    } catch (const AssumptionRefused& e) {
      ev.status = "refused";
      ev.message = e.what();
    } catch (const IdentificationError& e) {
      ev.status = "unidentified";
      ev.message = e.what();
    }
    run.policies.push_back(std::move(ev));
  }
  return run;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline nlohmann::json optional_delta(const std::optional<double>& post, const std::optional<double>& pre) {
  if (post && pre) return *post - *pre;
  return nullptr;
}

inline std::optional<double> dep(const std::optional<DependenceResult>& d, Aggregation how) {
  if (!d) return std::nullopt;
  return d->get(how);
}

}  // namespace detail

inline nlohmann::json deltas(const RegimeMetrics& post, const RegimeMetrics& pre) {
  using detail::dep;
  using detail::optional_delta;
  nlohmann::json rates = nlohmann::json::object();
  for (const auto& [g, r] : post.group_rates)
    if (auto it = pre.group_rates.find(g); it != pre.group_rates.end()) rates[g] = r - it->second;
  return {{"group_rates", rates},
          {"gap", post.gap - pre.gap},
          {"overall", post.overall - pre.overall},
          {"decision_independence_gap",
           optional_delta(post.decision_independence_gap, pre.decision_independence_gap)},
          {"sufficiency_max", optional_delta(dep(post.sufficiency, Aggregation::max),
                                             dep(pre.sufficiency, Aggregation::max))},
          {"sufficiency_mass_weighted",
           optional_delta(dep(post.sufficiency, Aggregation::mass_weighted),
                          dep(pre.sufficiency, Aggregation::mass_weighted))},
          {"separation_max", optional_delta(dep(post.separation, Aggregation::max),
                                            dep(pre.separation, Aggregation::max))},
          {"separation_mass_weighted",
           optional_delta(dep(post.separation, Aggregation::mass_weighted),
                          dep(pre.separation, Aggregation::mass_weighted))}};
}

inline nlohmann::json to_json(const AuditRun& run) {
  nlohmann::json policies = nlohmann::json::array();
  for (const auto& p : run.policies) {
    nlohmann::json entry = {{"label", p.label},
                            {"status", p.status},
                            {"treated_share", p.treated_share},
                            {"assumptions", io::to_json(p.assumptions)}};
    if (!p.message.empty()) entry["message"] = p.message;
    if (p.policy) entry["policy"] = io::to_json(*p.policy);
    entry["transport"] = p.transport ? io::to_json(*p.transport) : nlohmann::json(nullptr);
    if (p.metrics) {
      entry["metrics"] = io::to_json(*p.metrics);
      entry["deltas"] = deltas(*p.metrics, run.pre);
    } else {
      entry["metrics"] = nullptr;
      entry["deltas"] = nullptr;
    }
    policies.push_back(std::move(entry));
  }
  nlohmann::json model = nullptr;
  if (run.model) {
    model = io::to_json(*run.model);
    model["source"] = run.model_note;
  }
  return {{"format", "prospect-audit/1"},
          {"mode", std::string(to_string(run.mode))},
          {"rows", run.rows},
          {"settings",
           {{"outcome_level", run.settings.outcome_level},
            {"group_1", run.settings.group_1},
            {"group_0", run.settings.group_0}}},
          {"risk_model", model},
          {"risk_model_note", run.model_note},
          {"diagnostic_score", run.diagnostic_model ? io::to_json(*run.diagnostic_model) : nlohmann::json(nullptr)},
          {"pre_policy", run.pre_policy_source},
          {"pre", io::to_json(run.pre)},
          {"policies", policies},
          {"exit_status", run.exit_status()}};
}

inline std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string fixed6(const std::optional<double>& v) { return v ? fixed6(*v) : std::string("n/a"); }

/// Human-readable rendering; every number printed with six decimals.
inline std::string render_text(const AuditRun& run) {
  std::ostringstream out;
  const auto& s = run.settings;
  out << "prospective audit (" << to_string(run.mode) << " mode), " << run.rows << " rows\n";
  out << "outcome level " << s.outcome_level << "; gap = rate(" << s.group_1 << ") - rate(" << s.group_0
      << "); risk model: " << run.model_note << "; pre policy: " << run.pre_policy_source << "\n\n";

  auto row = [&](const RegimeMetrics& m) {
    auto rate = [&](const std::string& g) {
      auto it = m.group_rates.find(g);
      return it == m.group_rates.end() ? std::string("n/a") : fixed6(it->second);
    };
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %10s %10s %10s %10s %10s %10s %10s\n", m.regime.c_str(),
                  rate(s.group_1).c_str(), rate(s.group_0).c_str(), fixed6(m.gap).c_str(),
                  fixed6(m.overall).c_str(), fixed6(m.decision_independence_gap).c_str(),
                  fixed6(detail::dep(m.sufficiency, Aggregation::max)).c_str(),
                  fixed6(detail::dep(m.separation, Aggregation::max)).c_str());
    out << buf;
  };
  char head[256];
  std::snprintf(head, sizeof head, "%-16s %10s %10s %10s %10s %10s %10s %10s\n", "regime",
                ("rate[" + s.group_1 + "]").c_str(), ("rate[" + s.group_0 + "]").c_str(), "gap",
                "overall", "indep(D)", "suff.max", "sep.max");
  out << head;
  row(run.pre);
  for (const auto& p : run.policies) {
    if (p.metrics) {
      row(*p.metrics);
    } else {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-16s %s\n", p.label.c_str(), p.status.c_str());
      out << buf;
    }
  }
  out << "\n";
  for (const auto& p : run.policies) {
    out << "policy " << p.label << ": " << p.status << ", treated share " << fixed6(p.treated_share)
        << ", assumptions " << (p.assumptions.pass() ? "pass" : "fail") << "\n";
    for (const auto& v : p.assumptions.violations)
      out << "  unprecedented decision " << v.decision << " at " << describe(v.cell) << " (mass "
          << fixed6(v.covariate_mass * v.post_prob) << ")\n";
    for (const auto& g : p.assumptions.zero_mass_groups) out << "  group " << g << " has zero mass\n";
    if (p.transport)
      for (const auto& g : p.transport->groups)
        if (g.defined && g.identification_gap > 0.0)
          out << "  identification gap for group " << g.group << ": " << fixed6(g.identification_gap)
              << "\n";
    if (!p.message.empty()) out << "  " << p.message << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Analytic toy table

struct ToyRegime {
  std::string regime;
  Rational women;      // P(Y=1 | A=1)
  Rational non_women;  // P(Y=1 | A=0)
  Rational gap;
  Rational overall;
};

inline std::vector<ToyRegime> reproduce_toy(const ToyParams& params = {}) {
  std::vector<ToyRegime> out;
  auto add = [&](std::string name, const toy::ExactPolicy& policy) {
    const auto r = toy::analytic_post_exact(params, policy);
    const Rational overall = (Rational(1) - params.p_a) * r[0] + params.p_a * r[1];
    out.push_back({std::move(name), r[1], r[0], r[1] - r[0], overall});
  };
  add("pre", toy::exact_random_policy(params.pre_rate));
  add("flemish", toy::exact_paper_policy(toy::PaperPolicy::flemish));
  add("austrian", toy::exact_paper_policy(toy::PaperPolicy::austrian));
  return out;
}

inline nlohmann::json to_json(const std::vector<ToyRegime>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows)
    out.push_back({{"regime", r.regime},
                   {"p_y1_a1", r.women.to_double()},
                   {"p_y1_a0", r.non_women.to_double()},
                   {"gap", r.gap.to_double()},
                   {"overall", r.overall.to_double()},
                   {"exact",
                    {{"p_y1_a1", r.women.to_string()},
                     {"p_y1_a0", r.non_women.to_string()},
                     {"gap", r.gap.to_string()},
                     {"overall", r.overall.to_string()}}}});
  return out;
}

inline std::string render_text(const std::vector<ToyRegime>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %12s %12s %12s %12s\n", "regime", "P(Y=1|A=1)", "P(Y=1|A=0)",
                "gap", "overall");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10s %12s %12s %12s %12s\n", r.regime.c_str(),
                  fixed6(r.women.to_double()).c_str(), fixed6(r.non_women.to_double()).c_str(),
                  fixed6(r.gap.to_double()).c_str(), fixed6(r.overall.to_double()).c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace prospect
