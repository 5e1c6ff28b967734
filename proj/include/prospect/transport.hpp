#pragma once

#include <span>
#include <string>
#include <vector>

#include "prospect/cells.hpp"
#include "prospect/error.hpp"
#include "prospect/estimation.hpp"
#include "prospect/joint_table.hpp"
#include "prospect/numeric.hpp"
#include "prospect/policy.hpp"
#include "prospect/schema.hpp"

namespace prospect {

/// A decision cell the post policy uses but the pre-deployment data never
/// exhibits.
struct SupportViolation {
  Assignment cell;        // sensitive and covariate levels
  std::string decision;   // decision level label
  double covariate_mass;  // P(A = a, X = x)
  double post_prob;       // P_post(D = d | A = a, X = x)
};

struct AssumptionReport {
  std::vector<std::string> zero_mass_groups;
  std::vector<SupportViolation> violations;
  /// Per sensitive level: P(A = a, X = x, D = d) under the post policy summed
  /// over the violating cells of that group.
  std::vector<std::pair<std::string, double>> affected_mass;
  /// Assumptions that cannot be checked from pre-deployment data and are
  /// taken on trust.
  std::vector<std::string> asserted = {"consistency", "unconfoundedness", "stable-cate",
                                       "no-feedback"};

  bool pass() const { return zero_mass_groups.empty() && violations.empty(); }
};

/// Strict-mode refusal: the post policy leaves the identified support.
class AssumptionRefused : public Error {
 public:
  explicit AssumptionRefused(AssumptionReport report)
      : Error("post-deployment policy places mass on " + std::to_string(report.violations.size()) +
              " decision cell(s) unseen before deployment"),
        report_(std::move(report)) {}
  const AssumptionReport& report() const { return report_; }

 private:
  AssumptionReport report_;
};

enum class Mode { strict, permissive };

inline std::string_view to_string(Mode m) { return m == Mode::strict ? "strict" : "permissive"; }

/// Flags every (a, x, d) with covariate mass, post-policy mass and no
/// pre-deployment mass, and every group with zero marginal mass.
inline AssumptionReport check_assumptions(const TabularPolicy& pre, const JointTable& covariate_dist,
                                          const TabularPolicy& post) {
  if (pre.cell_variables() != post.cell_variables() || !(pre.decision() == post.decision()))
    throw SchemaError("pre and post policies are defined over different schemas");
  detail::check_covariate_dist(covariate_dist, post.cell_variables());

  AssumptionReport report;
  const auto& group = post.cell_variables()[0];
  const std::size_t nx = post.covariate_cells();
  const std::size_t nd = post.decisions();
  for (Level a = 0; a < group.cardinality(); ++a) {
    CompensatedSum group_mass, affected;
    for (std::size_t x = 0; x < nx; ++x) group_mass += covariate_dist.mass(post.cell_of(a, x));
    if (group_mass.value() == 0.0) {
      report.zero_mass_groups.push_back(group.levels[a]);
      continue;
    }
    for (std::size_t x = 0; x < nx; ++x) {
      const auto cell = post.cell_of(a, x);
      const double m = covariate_dist.mass(cell);
      if (m == 0.0) continue;
      for (Level d = 0; d < nd; ++d) {
        const double q = post.prob(cell, d);
        if (q > 0.0 && pre.mass_or_zero(cell, d) == 0.0) {
          report.violations.push_back({post.cell_assignment(cell), post.decision().levels[d], m, q});
          affected += m * q;
        }
      }
    }
    report.affected_mass.emplace_back(group.levels[a], affected.value());
  }
  return report;
}

/// One summand of the transport formula for a single (x, d) cell.
struct Contribution {
  std::size_t x_cell;
  Level decision;
  double p_x;                    // P_pre(X = x | A = a)
  double p_d;                    // P_post(D = d | A = a, X = x)
  std::vector<double> p_y;       // P_pre(Y = y | A = a, X = x, D = d), per y
};

struct GroupPrediction {
  std::string group;
  bool defined = false;                 // false when P(A = a) = 0
  std::vector<double> outcome;          // predicted P_post(Y = y | A = a)
  std::vector<Contribution> contributions;
  double identification_gap = 0.0;      // post mass on unidentified cells
};

struct TransportResult {
  VariableSpec group_var;
  std::vector<VariableSpec> covariate_vars;
  VariableSpec decision_var;
  VariableSpec outcome_var;
  Mode mode = Mode::strict;
  std::vector<GroupPrediction> groups;
  AssumptionReport assumptions;

  const GroupPrediction& group(std::string_view label) const {
    for (const auto& g : groups)
      if (g.group == label) return g;
    throw SchemaError("no group '" + std::string(label) + "' in transport result");
  }

  Assignment covariate_assignment(std::size_t x_cell) const {
    const MixedRadix radix(cardinalities(covariate_vars));
    Assignment out;
    for (std::size_t i = 0; i < covariate_vars.size(); ++i)
      out.emplace_back(covariate_vars[i].name, covariate_vars[i].levels[radix.digit(x_cell, i)]);
    return out;
  }
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw SchemaError("transport inputs: " + what);
}

}  // namespace detail

/// Predicts P_post(Y | A = a) for every group with positive mass as
///   sum over (x, d) in Pi_post of
///     P_pre(Y | a, x, d) * P_pre(x | a) * P_post(d | a, x),
/// where Pi_post holds the (x, d) with P_pre(x | a) * P_post(d | a, x) > 0.
///
/// Only the pre-deployment covariate law enters; there is no parameter for a
/// post-deployment one. Strict mode refuses when Pi_post reaches a cell that
/// `outcome_given` does not support. Permissive mode skips such cells and
/// reports their mass as the group's identification gap.
inline TransportResult transport(const ConditionalTable& outcome_given,
                                 const ConditionalTable& covariates_given,
                                 const JointTable& group_dist, const TabularPolicy& post,
                                 Mode mode = Mode::strict) {
  using detail::require;
  require(covariates_given.given().size() == 1, "covariate table must condition on A alone");
  const auto& group_var = covariates_given.given()[0];
  const auto& xvars = covariates_given.target();
  require(outcome_given.target().size() == 1, "outcome table must have a single target");
  const auto& yvar = outcome_given.target()[0];
  const auto& ygiven = outcome_given.given();
  require(ygiven.size() == xvars.size() + 2, "outcome table must condition on (A, X..., D)");
  require(ygiven.front() == group_var, "outcome table must condition on A first");
  for (std::size_t i = 0; i < xvars.size(); ++i)
    require(ygiven[i + 1] == xvars[i], "outcome and covariate tables disagree on X");
  const auto& dvar = ygiven.back();
  require(group_dist.variables().size() == 1 && group_dist.variables()[0] == group_var,
          "group distribution must be over A alone");
  std::vector<VariableSpec> cell_vars{group_var};
  cell_vars.insert(cell_vars.end(), xvars.begin(), xvars.end());
  require(post.cell_variables() == cell_vars && post.decision() == dvar,
          "policy is not defined over (A, X) -> D of the tables");

  const std::size_t nx = covariates_given.target_cells();
  const std::size_t nd = dvar.cardinality();
  const std::size_t ny = yvar.cardinality();

  TransportResult result{group_var, xvars, dvar, yvar, mode, {}, {}};
  for (Level a = 0; a < group_var.cardinality(); ++a) {
    GroupPrediction pred;
    pred.group = group_var.levels[a];
    if (group_dist.mass(a) == 0.0) {
      result.assumptions.zero_mass_groups.push_back(pred.group);
      result.groups.push_back(std::move(pred));
      continue;
    }
    if (!covariates_given.supported(a))
      throw IdentificationError("P_pre(X | " + group_var.name + "=" + pred.group +
                                ") is not identified although the group has positive mass");
    pred.defined = true;
    std::vector<CompensatedSum> sums(ny);
    CompensatedSum gap, affected;
    const double pa = group_dist.mass(a);
    for (std::size_t x = 0; x < nx; ++x) {
      const double px = covariates_given.prob(x, a);
      if (px == 0.0) continue;
      const auto cell = post.cell_of(a, x);
      for (Level d = 0; d < nd; ++d) {
        const double pd = post.prob(cell, d);
        if (pd == 0.0) continue;
        const std::size_t given_cell = cell * nd + d;
        if (!outcome_given.supported(given_cell)) {
          result.assumptions.violations.push_back(
              {post.cell_assignment(cell), dvar.levels[d], pa * px, pd});
          gap += px * pd;
          affected += pa * px * pd;
          continue;
        }
        const auto dist = outcome_given.distribution(given_cell);
        Contribution c{x, d, px, pd, std::vector<double>(dist.begin(), dist.end())};
        for (std::size_t y = 0; y < ny; ++y) sums[y] += c.p_y[y] * px * pd;
        pred.contributions.push_back(std::move(c));
      }
    }
    pred.identification_gap = gap.value();
    result.assumptions.affected_mass.emplace_back(pred.group, affected.value());
    pred.outcome.resize(ny);
    for (std::size_t y = 0; y < ny; ++y) pred.outcome[y] = sums[y].value();
    result.groups.push_back(std::move(pred));
  }
  if (mode == Mode::strict && !result.assumptions.violations.empty())
    throw AssumptionRefused(result.assumptions);
  return result;
}

inline bool complete(const TransportResult& result) {
  for (const auto& g : result.groups)
    if (g.defined && g.identification_gap > 0.0) return false;
  return true;
}

namespace detail {

inline void require_complete(const TransportResult& result) {
  for (const auto& g : result.groups)
    if (g.defined && g.identification_gap > 0.0)
      throw IdentificationError("group " + result.group_var.name + "=" + g.group + " has " +
                                round_trip_decimal(g.identification_gap) +
                                " unidentified post-policy mass");
}

}  // namespace detail

/// P_post(A, Y) = P(A) * P_post(Y | A). Requires every group to be fully
/// identified.
inline JointTable predicted_joint(const TransportResult& result, const JointTable& group_dist) {
  detail::require_complete(result);
  const std::size_t ny = result.outcome_var.cardinality();
  std::vector<double> mass(result.groups.size() * ny, 0.0);
  for (std::size_t a = 0; a < result.groups.size(); ++a) {
    const auto& g = result.groups[a];
    if (!g.defined) continue;
    for (std::size_t y = 0; y < ny; ++y) mass[a * ny + y] = group_dist.mass(a) * g.outcome[y];
  }
  return JointTable({result.group_var, result.outcome_var}, std::move(mass));
}

/// The full predicted post-deployment joint over (A, X..., D, Y).
inline JointTable predicted_full_joint(const TransportResult& result, const JointTable& group_dist) {
  detail::require_complete(result);
  std::vector<VariableSpec> vars{result.group_var};
  vars.insert(vars.end(), result.covariate_vars.begin(), result.covariate_vars.end());
  vars.push_back(result.decision_var);
  vars.push_back(result.outcome_var);
  const MixedRadix radix(cardinalities(vars));
  const std::size_t nd = result.decision_var.cardinality();
  const std::size_t ny = result.outcome_var.cardinality();
  const std::size_t nx = radix.size() / (result.group_var.cardinality() * nd * ny);
  std::vector<double> mass(radix.size(), 0.0);
  for (std::size_t a = 0; a < result.groups.size(); ++a) {
    const auto& g = result.groups[a];
    if (!g.defined) continue;
    const double pa = group_dist.mass(a);
    for (const auto& c : g.contributions)
      for (std::size_t y = 0; y < ny; ++y)
        mass[((a * nx + c.x_cell) * nd + c.decision) * ny + y] = pa * c.p_x * c.p_d * c.p_y[y];
  }
  return JointTable(std::move(vars), std::move(mass));
}

/// Pre-deployment tables feeding transport(), estimated from one dataset.
struct TransportInputs {
  JointTable group_covariates;       // P_pre(A, X)
  JointTable group;                  // P_pre(A)
  ConditionalTable covariates_given; // P_pre(X | A)
  ConditionalTable outcome_given;    // P_pre(Y | A, X, D)
};

inline std::vector<std::string> outcome_conditioning_names(const Schema& schema) {
  std::vector<std::string> out{schema[schema.sensitive()].name};
  for (auto i : schema.covariates()) out.push_back(schema[i].name);
  out.push_back(schema[schema.decision()].name);
  return out;
}

inline TransportInputs fit_transport_inputs(const Dataset& data, double alpha = 0.0) {
  const auto& schema = data.schema();
  const auto cell_names = names_of(schema.cell_variables());
  const auto x_names = names_of(schema.covariate_variables());
  const std::vector<std::string> a_name{schema[schema.sensitive()].name};
  const std::vector<std::string> y_name{schema[schema.outcome()].name};
  auto pax = empirical_joint(data, cell_names);
  auto pa = pax.marginal(a_name);
  return {std::move(pax), std::move(pa), fit_conditional(data, x_names, a_name, alpha),
          fit_conditional(data, y_name, outcome_conditioning_names(schema), alpha)};
}

/// Same tables read off an exact joint over the schema's variables.
inline TransportInputs transport_inputs_from_joint(const JointTable& joint, const Schema& schema) {
  const auto cell_names = names_of(schema.cell_variables());
  const auto x_names = names_of(schema.covariate_variables());
  const std::vector<std::string> a_name{schema[schema.sensitive()].name};
  const std::vector<std::string> y_name{schema[schema.outcome()].name};
  auto pax = joint.marginal(cell_names);
  auto pa = pax.marginal(a_name);
  return {std::move(pax), std::move(pa), conditional_from_joint(joint, x_names, a_name),
          conditional_from_joint(joint, y_name, outcome_conditioning_names(schema))};
}

inline TransportResult transport(const TransportInputs& in, const TabularPolicy& post,
                                 Mode mode = Mode::strict) {
  return transport(in.outcome_given, in.covariates_given, in.group, post, mode);
}

}  // namespace prospect
