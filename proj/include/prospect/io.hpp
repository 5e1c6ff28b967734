#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "prospect/error.hpp"
#include "prospect/estimation.hpp"
#include "prospect/metrics.hpp"
#include "prospect/policy.hpp"
#include "prospect/schema.hpp"
#include "prospect/toy.hpp"
#include "prospect/transport.hpp"

// JSON encodings of schemas, risk models, policies and reports. Reports use
// plain JSON numbers (shortest round-trip form); pinned model coefficients
// are written as decimal strings.

namespace prospect::io {

using json = nlohmann::json;

/// Reads a probability or coefficient given as a JSON number or as a string
/// holding a decimal or a fraction ("2/3").
inline double number(const json& value, const std::string& what) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    const auto text = value.get<std::string>();
    if (text.find('/') != std::string::npos) return Rational::parse(text).to_double();
    double out = 0.0;
    if (parse_decimal(text, out)) return out;
  }
  throw ConfigError(what + ": expected a number, got " + value.dump());
}

inline const json& member(const json& object, const std::string& key, const std::string& where) {
  if (!object.is_object() || !object.contains(key))
    throw ConfigError(where + ": missing '" + key + "'");
  return object.at(key);
}

inline std::string text(const json& object, const std::string& key, const std::string& where) {
  const auto& v = member(object, key, where);
  if (!v.is_string()) throw ConfigError(where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// --- schema ---------------------------------------------------------------

inline json to_json(const VariableSpec& v) {
  return {{"name", v.name}, {"role", std::string(to_string(v.role))}, {"levels", v.levels}};
}

inline json to_json(const Schema& schema) {
  json vars = json::array();
  for (const auto& v : schema.variables()) vars.push_back(to_json(v));
  return {{"variables", vars}};
}

inline VariableSpec variable_from_json(const json& j) {
  VariableSpec v;
  v.name = text(j, "name", "variable");
  v.role = role_from_string(text(j, "role", "variable '" + v.name + "'"));
  const auto& levels = member(j, "levels", "variable '" + v.name + "'");
  if (!levels.is_array()) throw ConfigError("variable '" + v.name + "': levels must be a list");
  for (const auto& l : levels) {
    if (l.is_string())
      v.levels.push_back(l.get<std::string>());
    else if (l.is_number_integer())
      v.levels.push_back(std::to_string(l.get<long long>()));
    else
      throw ConfigError("variable '" + v.name + "': levels must be strings or integers");
  }
  return v;
}

inline Schema schema_from_json(const json& j) {
  const auto& vars = member(j, "variables", "schema");
  if (!vars.is_array()) throw ConfigError("schema: 'variables' must be a list");
  std::vector<VariableSpec> out;
  for (const auto& v : vars) out.push_back(variable_from_json(v));
  try {
    return Schema(std::move(out));
  } catch (const SchemaError& e) {
    throw ConfigError(std::string("schema: ") + e.what());
  }
}

// --- risk model -----------------------------------------------------------

inline json to_json(const RiskModel& model) {
  json inputs = json::array();
  for (const auto& v : model.inputs())
    inputs.push_back({{"name", v.name}, {"levels", v.levels}, {"reference", v.levels.front()}});
  json coefs = json::array();
  for (std::size_t f = 0; f < model.features().size(); ++f) {
    const auto& feat = model.features()[f];
    const auto& v = model.inputs()[feat.input];
    coefs.push_back({{"variable", v.name},
                     {"level", v.levels[feat.level]},
                     {"value", round_trip_decimal(model.coefficients()[f])}});
  }
  const auto& d = model.diagnostics();
  return {{"inputs", inputs},
          {"intercept", round_trip_decimal(model.intercept())},
          {"coefficients", coefs},
          {"diagnostics",
           {{"iterations", d.iterations},
            {"gradient_max_norm", d.gradient_max_norm},
            {"converged", d.converged},
            {"rows", d.rows},
            {"distinct_rows", d.distinct_rows}}}};
}

inline RiskModel risk_model_from_json(const json& j) {
  std::vector<VariableSpec> inputs;
  for (const auto& in : member(j, "inputs", "risk model")) {
    VariableSpec v{text(in, "name", "risk model input"), Role::covariate, {}};
    for (const auto& l : member(in, "levels", "risk model input '" + v.name + "'"))
      v.levels.push_back(l.get<std::string>());
    if (in.contains("reference") && in.at("reference").get<std::string>() != v.levels.front())
      throw ConfigError("risk model input '" + v.name + "': reference must be the first level");
    inputs.push_back(std::move(v));
  }
  const double intercept = number(member(j, "intercept", "risk model"), "risk model intercept");
  // Coefficients are matched to the encoded features by (variable, level).
  RiskModel layout(inputs, 0.0, std::vector<double>([&] {
                     std::size_t k = 0;
                     for (const auto& v : inputs) k += v.cardinality() - 1;
                     return k;
                   }(), 0.0));
  std::vector<double> coefs(layout.features().size(), 0.0);
  std::vector<bool> seen(coefs.size(), false);
  for (const auto& c : member(j, "coefficients", "risk model")) {
    const auto var = text(c, "variable", "coefficient");
    const auto level = text(c, "level", "coefficient");
    bool matched = false;
    for (std::size_t f = 0; f < coefs.size(); ++f) {
      const auto& feat = layout.features()[f];
      const auto& v = inputs[feat.input];
      if (v.name == var && v.levels[feat.level] == level) {
        coefs[f] = number(member(c, "value", "coefficient"), "coefficient " + var + "=" + level);
        seen[f] = true;
        matched = true;
      }
    }
    if (!matched) throw ConfigError("risk model coefficient for unknown feature " + var + "=" + level);
  }
  for (std::size_t f = 0; f < coefs.size(); ++f)
    if (!seen[f]) throw ConfigError("risk model is missing coefficient " + layout.feature_name(f));
  FitDiagnostics diag;
  if (j.contains("diagnostics")) {
    const auto& d = j.at("diagnostics");
    diag.iterations = d.value("iterations", 0);
    diag.gradient_max_norm = d.value("gradient_max_norm", 0.0);
    diag.converged = d.value("converged", false);
    diag.rows = d.value("rows", std::size_t{0});
    diag.distinct_rows = d.value("distinct_rows", std::size_t{0});
  }
  return RiskModel(std::move(inputs), intercept, std::move(coefs), diag);
}

// --- policies -------------------------------------------------------------

/// Flat table: one row per (a, x, d) with its probability.
inline json to_json(const TabularPolicy& policy) {
  json rows = json::array();
  for (std::size_t c = 0; c < policy.cells(); ++c) {
    if (!policy.supported(c)) continue;
    for (Level d = 0; d < policy.decisions(); ++d) {
      json row = json::object();
      for (const auto& [name, level] : policy.cell_assignment(c)) row[name] = level;
      row[policy.decision().name] = policy.decision().levels[d];
      row["prob"] = policy.prob(c, d);
      rows.push_back(std::move(row));
    }
  }
  json unsupported = json::array();
  for (std::size_t c = 0; c < policy.cells(); ++c)
    if (!policy.supported(c)) {
      json cell = json::object();
      for (const auto& [name, level] : policy.cell_assignment(c)) cell[name] = level;
      unsupported.push_back(std::move(cell));
    }
  json out = {{"label", policy.label()}, {"rows", rows}};
  if (!unsupported.empty()) out["unsupported"] = unsupported;
  return out;
}

inline TabularPolicy tabular_from_json(const json& rows, const Schema& schema, const std::string& label) {
  const auto cell_vars = schema.cell_variables();
  const auto& decision = schema[schema.decision()];
  const MixedRadix radix(cardinalities(cell_vars));
  const std::size_t nd = decision.cardinality();
  std::vector<double> probs(radix.size() * nd, 0.0);
  std::vector<bool> seen(probs.size(), false);
  const std::string where = "policy '" + label + "'";
  if (!rows.is_array()) throw ConfigError(where + ": 'rows' must be a list");
  for (const auto& row : rows) {
    std::vector<Level> digits(cell_vars.size());
    try {
      for (std::size_t i = 0; i < cell_vars.size(); ++i)
        digits[i] = cell_vars[i].level(text(row, cell_vars[i].name, where));
      const auto d = decision.level(text(row, decision.name, where));
      const auto idx = radix.encode(digits) * nd + d;
      if (seen[idx]) throw ConfigError(where + ": duplicate row " + row.dump());
      probs[idx] = number(member(row, "prob", where), where + " prob");
      seen[idx] = true;
    } catch (const SchemaError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  // Decision levels left out of a cell carry zero probability; every cell
  // needs at least one listed decision.
  for (std::size_t c = 0; c < radix.size(); ++c) {
    bool any = false;
    for (std::size_t d = 0; d < nd; ++d) any = any || seen[c * nd + d];
    if (!any) {
      Assignment cell;
      for (std::size_t i = 0; i < cell_vars.size(); ++i)
        cell.emplace_back(cell_vars[i].name, cell_vars[i].levels[radix.digit(c, i)]);
      throw ConfigError(where + ": no rows for cell " + describe(cell));
    }
  }
  try {
    return TabularPolicy(label, cell_vars, decision, std::move(probs));
  } catch (const PolicyError& e) {
    throw ConfigError(e.what());
  }
}

/// Loads a risk model referenced from a policy or model block: either an
/// inline object or a path (relative to `base`) to a JSON file.
inline std::shared_ptr<const RiskModel> model_reference(const json& ref, const std::filesystem::path& base) {
  if (ref.is_object()) return std::make_shared<const RiskModel>(risk_model_from_json(ref));
  if (ref.is_string()) {
    const auto path = base / ref.get<std::string>();
    return std::make_shared<const RiskModel>(risk_model_from_json(read_json_file(path)));
  }
  throw ConfigError("model reference must be an object or a file path");
}

inline PolicySpec policy_spec_from_json(const json& j, const Schema& schema,
                                        const std::filesystem::path& base = {}) {
  const auto label = text(j, "label", "policy");
  const auto kind = text(j, "kind", "policy '" + label + "'");
  const std::string where = "policy '" + label + "'";
  PolicySpec spec{label, RandomSpec{}};
  if (kind == "random") {
    spec.kind = RandomSpec{number(member(j, "rate", where), where + " rate")};
  } else if (kind == "threshold") {
    ThresholdSpec t;
    t.q = number(member(j, "q", where), where + " q");
    const auto treat = j.value("treat", std::string("above"));
    if (treat != "above" && treat != "below") throw ConfigError(where + ": treat must be above or below");
    t.treat_above = treat == "above";
    if (j.contains("model")) t.model = model_reference(j.at("model"), base);
    spec.kind = t;
  } else if (kind == "band") {
    BandSpec b;
    b.q_low = number(member(j, "q_low", where), where + " q_low");
    b.q_high = number(member(j, "q_high", where), where + " q_high");
    b.thinning = j.contains("thinning") ? number(j.at("thinning"), where + " thinning") : 1.0;
    if (j.contains("model")) b.model = model_reference(j.at("model"), base);
    spec.kind = b;
  } else if (kind == "tabular") {
    spec.kind = TableSpec{tabular_from_json(member(j, "rows", where), schema, label)};
  } else if (kind == "preset") {
    const auto name = text(j, "name", where);
    const auto toy_schema = toy::schema();
    if (!(schema == toy_schema))
      throw ConfigError(where + ": presets are defined on the toy schema (A, X1, X2, D, Y) only");
    const auto presets = toy::paper_policies();
    if (name == "flemish")
      spec.kind = TableSpec{presets.flemish.relabeled(label)};
    else if (name == "austrian")
      spec.kind = TableSpec{presets.austrian.relabeled(label)};
    else
      throw ConfigError(where + ": unknown preset '" + name + "'");
  } else {
    throw ConfigError(where + ": unknown kind '" + kind + "'");
  }
  try {
    validate(spec);
  } catch (const PolicyError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

// --- toy parameters -------------------------------------------------------

inline json to_json(const ToyParams& p) {
  return {{"p_a", p.p_a.to_string()},
          {"p_x1_base", p.p_x1_base.to_string()},
          {"p_x1_slope", p.p_x1_slope.to_string()},
          {"p_x2", p.p_x2.to_string()},
          {"pre_rate", p.pre_rate.to_string()},
          {"y_intercept", p.y_intercept.to_string()},
          {"y_care", p.y_care.to_string()},
          {"y_education", p.y_education.to_string()},
          {"y_treatment", p.y_treatment.to_string()}};
}

// --- reports --------------------------------------------------------------

inline json to_json(const Assignment& a) {
  json out = json::object();
  for (const auto& [k, v] : a) out[k] = v;
  return out;
}

inline json to_json(const AssumptionReport& r) {
  json violations = json::array();
  for (const auto& v : r.violations)
    violations.push_back({{"cell", to_json(v.cell)},
                          {"decision", v.decision},
                          {"covariate_mass", v.covariate_mass},
                          {"post_prob", v.post_prob}});
  json affected = json::object();
  for (const auto& [g, m] : r.affected_mass) affected[g] = m;
  return {{"verdict", r.pass() ? "pass" : "fail"},
          {"zero_mass_groups", r.zero_mass_groups},
          {"support_violations", violations},
          {"affected_mass", affected},
          {"checked", {"positivity", "no-unprecedented-decisions"}},
          {"asserted_by_user", r.asserted}};
}

inline json to_json(const TransportResult& r) {
  json groups = json::object();
  for (const auto& g : r.groups) {
    if (!g.defined) {
      groups[g.group] = {{"defined", false}};
      continue;
    }
    json dist = json::object();
    for (std::size_t y = 0; y < g.outcome.size(); ++y) dist[r.outcome_var.levels[y]] = g.outcome[y];
    json cells = json::array();
    json support = json::array();
    for (const auto& c : g.contributions) {
      json py = json::object();
      json product = json::object();
      for (std::size_t y = 0; y < c.p_y.size(); ++y) {
        py[r.outcome_var.levels[y]] = c.p_y[y];
        product[r.outcome_var.levels[y]] = c.p_y[y] * c.p_x * c.p_d;
      }
      const auto x = to_json(r.covariate_assignment(c.x_cell));
      cells.push_back({{"x", x},
                       {"d", r.decision_var.levels[c.decision]},
                       {"p_x_given_a", c.p_x},
                       {"p_post_d_given_a_x", c.p_d},
                       {"p_y_given_a_x_d", py},
                       {"product", product}});
      support.push_back({{"x", x}, {"d", r.decision_var.levels[c.decision]}});
    }
    groups[g.group] = {{"defined", true},
                       {"outcome", dist},
                       {"identification_gap", g.identification_gap},
                       {"contributions", cells},
                       {"support", support}};
  }
  return {{"mode", std::string(to_string(r.mode))}, {"groups", groups}};
}

inline json to_json(const DependenceResult& d) {
  json excluded = json::array();
  for (const auto& e : d.excluded) excluded.push_back(to_json(e));
  json out = {{"excluded_cells", excluded}, {"included_mass", d.included_mass}};
  out["max"] = d.max ? json(*d.max) : json(nullptr);
  out["mass_weighted"] = d.mass_weighted ? json(*d.mass_weighted) : json(nullptr);
  return out;
}

inline json to_json(const RegimeMetrics& m) {
  json out = {{"regime", m.regime},
              {"predicted", m.predicted},
              {"group_rates", m.group_rates},
              {"gap", m.gap},
              {"overall", m.overall}};
  out["decision_independence_gap"] =
      m.decision_independence_gap ? json(*m.decision_independence_gap) : json(nullptr);
  out["sufficiency"] = m.sufficiency ? to_json(*m.sufficiency) : json(nullptr);
  out["separation"] = m.separation ? to_json(*m.separation) : json(nullptr);
  return out;
}

}  // namespace prospect::io
