#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prospect/error.hpp"
#include "prospect/joint_table.hpp"
#include "prospect/numeric.hpp"

namespace prospect {

namespace detail {

// Conditional distribution of the non-group variables for each group level,
// from a joint whose first variable is the group. nullopt for empty groups.
inline std::vector<std::optional<std::vector<double>>> group_conditionals(const JointTable& joint) {
  const auto ng = joint.variables().at(0).cardinality();
  const auto rest = joint.size() / ng;
  std::vector<std::optional<std::vector<double>>> out(ng);
  for (std::size_t a = 0; a < ng; ++a) {
    CompensatedSum total;
    for (std::size_t v = 0; v < rest; ++v) total += joint.mass(a * rest + v);
    if (total.value() == 0.0) continue;
    std::vector<double> dist(rest);
    for (std::size_t v = 0; v < rest; ++v) dist[v] = joint.mass(a * rest + v) / total.value();
    out[a] = std::move(dist);
  }
  return out;
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
  CompensatedSum s;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s.value();
}

inline Level group_level(const JointTable& joint, const std::string& label) {
  return joint.variables().at(0).level(label);
}

}  // namespace detail

/// P(Y = y | A = group_1) - P(Y = y | A = group_0) on a joint over (A, Y).
inline double group_gap(const JointTable& joint, const std::string& outcome_level,
                        const std::string& group_1, const std::string& group_0) {
  if (joint.variables().size() != 2) throw SchemaError("group_gap needs a joint over (A, Y)");
  const auto& a = joint.variables()[0];
  const auto& y = joint.variables()[1];
  auto rate = [&](const std::string& g) {
    const auto c = condition(joint, {{a.name, g}});
    return c.mass(std::vector<Level>{y.level(outcome_level)});
  };
  return rate(group_1) - rate(group_0);
}

/// Marginal P(Y = y) on a joint over (A, Y).
inline double overall_rate(const JointTable& joint, const std::string& outcome_level) {
  if (joint.variables().size() != 2) throw SchemaError("overall_rate needs a joint over (A, Y)");
  return joint.event_mass({{joint.variables()[1].name, outcome_level}});
}

/// P(Y = y | A = a) for every group with positive mass.
inline std::map<std::string, double> group_rates(const JointTable& joint,
                                                 const std::string& outcome_level) {
  std::map<std::string, double> out;
  const auto& a = joint.variables().at(0);
  const auto y = joint.variables().at(1).level(outcome_level);
  const auto cond = detail::group_conditionals(joint);
  for (std::size_t g = 0; g < cond.size(); ++g)
    if (cond[g]) out[a.levels[g]] = (*cond[g])[y];
  return out;
}

/// Total variation distance between the groups' conditional distributions
/// of the remaining variables, maximized over group pairs. The group is the
/// joint's first variable.
inline double independence_gap(const JointTable& joint) {
  const auto cond = detail::group_conditionals(joint);
  std::vector<const std::vector<double>*> present;
  for (const auto& c : cond)
    if (c) present.push_back(&*c);
  if (present.size() < 2)
    throw UndefinedConditional({{joint.variables().at(0).name, "<fewer than two groups with mass>"}});
  double worst = 0.0;
  for (std::size_t i = 0; i < present.size(); ++i)
    for (std::size_t j = i + 1; j < present.size(); ++j)
      worst = std::max(worst, detail::total_variation(*present[i], *present[j]));
  return worst;
}

enum class Aggregation { max, mass_weighted };

struct DependenceResult {
  /// nullopt when no conditioning cell has every group present.
  std::optional<double> max;
  /// Sum over included cells of P(W = w) * TV(w); excluded cells add nothing.
  std::optional<double> mass_weighted;
  std::vector<Assignment> excluded;  // conditioning cells missing some group
  double included_mass = 0.0;

  std::optional<double> get(Aggregation how) const {
    return how == Aggregation::max ? max : mass_weighted;
  }
};

/// Group dependence of V within each cell of W: for each w, the largest
/// total variation distance between groups' P(V | A = a, W = w). The joint
/// is over (A, V, W) with `v_count` variables in V.
inline DependenceResult conditional_dependence(const JointTable& joint, std::size_t v_count = 1) {
  const auto& vars = joint.variables();
  if (vars.size() < 1 + v_count) throw SchemaError("conditional_dependence needs (A, V, W)");
  std::vector<std::string> order{vars[0].name};
  for (std::size_t i = 1 + v_count; i < vars.size(); ++i) order.push_back(vars[i].name);
  for (std::size_t i = 1; i < 1 + v_count; ++i) order.push_back(vars[i].name);
  // Reordered as (A, W..., V...) so each (a, w) block is contiguous in V.
  const auto t = joint.marginal(order);
  const std::size_t ng = vars[0].cardinality();
  std::size_t nv = 1;
  for (std::size_t i = 1; i < 1 + v_count; ++i) nv *= vars[i].cardinality();
  const std::size_t nw = t.size() / (ng * nv);
  const MixedRadix w_radix([&] {
    std::vector<std::size_t> cards;
    for (std::size_t i = 1 + v_count; i < vars.size(); ++i) cards.push_back(vars[i].cardinality());
    return cards;
  }());

  DependenceResult out;
  double worst = 0.0;
  CompensatedSum weighted, included;
  bool any = false;
  for (std::size_t w = 0; w < nw; ++w) {
    std::vector<std::vector<double>> dists;
    CompensatedSum wmass;
    bool missing = false;
    for (std::size_t a = 0; a < ng; ++a) {
      CompensatedSum m;
      for (std::size_t v = 0; v < nv; ++v) m += t.mass((a * nw + w) * nv + v);
      wmass += m.value();
      if (m.value() == 0.0) {
        missing = true;
        continue;
      }
      std::vector<double> d(nv);
      for (std::size_t v = 0; v < nv; ++v) d[v] = t.mass((a * nw + w) * nv + v) / m.value();
      dists.push_back(std::move(d));
    }
    if (wmass.value() == 0.0) continue;
    if (missing) {
      Assignment cell;
      for (std::size_t i = 0; i < w_radix.rank(); ++i) {
        const auto& wv = t.variables()[1 + i];
        cell.emplace_back(wv.name, wv.levels[w_radix.digit(w, i)]);
      }
      out.excluded.push_back(std::move(cell));
      continue;
    }
    double tv = 0.0;
    for (std::size_t i = 0; i < dists.size(); ++i)
      for (std::size_t j = i + 1; j < dists.size(); ++j)
        tv = std::max(tv, detail::total_variation(dists[i], dists[j]));
    any = true;
    worst = std::max(worst, tv);
    weighted += wmass.value() * tv;
    included += wmass.value();
  }
  if (any) {
    out.max = worst;
    out.mass_weighted = weighted.value();
  }
  out.included_mass = included.value();
  return out;
}

/// Collapses a joint over (A, ..., Y) to (A, R, Y), where R is a score
/// computed from each cell of the input joint and discretized to its
/// distinct values (ascending). `score` receives the cell's level digits in
/// the joint's variable order.
inline JointTable score_joint(const JointTable& joint, const std::string& group_var,
                              const std::string& outcome_var,
                              const std::function<double(std::span<const Level>)>& score,
                              const std::string& score_name = "R") {
  const auto ga = joint.position(group_var);
  const auto gy = joint.position(outcome_var);
  std::vector<double> scores(joint.size());
  std::vector<Level> digits(joint.variables().size());
  for (std::size_t c = 0; c < joint.size(); ++c) {
    joint.radix().decode(c, digits);
    scores[c] = score(digits);
  }
  std::vector<double> atoms(scores);
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  if (atoms.size() < 2) atoms.push_back(atoms.back() + 1.0);  // keep R a valid two-level variable

  VariableSpec r{score_name, Role::covariate, {}};
  for (double s : atoms) r.levels.push_back(round_trip_decimal(s));
  const auto& a = joint.variables()[ga];
  const auto& y = joint.variables()[gy];
  const MixedRadix out_radix({a.cardinality(), atoms.size(), y.cardinality()});
  std::vector<CompensatedSum> sums(out_radix.size());
  for (std::size_t c = 0; c < joint.size(); ++c) {
    const auto ri = static_cast<std::size_t>(
        std::lower_bound(atoms.begin(), atoms.end(), scores[c]) - atoms.begin());
    const Level out_digits[3] = {joint.radix().digit(c, ga), static_cast<Level>(ri),
                                 joint.radix().digit(c, gy)};
    sums[out_radix.encode(out_digits)] += joint.mass(c);
  }
  std::vector<double> mass(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) mass[i] = sums[i].value();
  return JointTable({a, r, y}, std::move(mass));
}

/// Y independent of A given R, on a joint over (A, R, Y).
inline DependenceResult sufficiency(const JointTable& arY) {
  const auto& v = arY.variables();
  return conditional_dependence(arY.marginal({v[0].name, v[2].name, v[1].name}));
}

/// R independent of A given Y, on a joint over (A, R, Y).
inline DependenceResult separation(const JointTable& arY) { return conditional_dependence(arY); }

/// Inequality functionals for one regime (pre-deployment or one candidate
/// policy's predicted post-deployment world).
struct RegimeMetrics {
  std::string regime;
  bool predicted = false;
  std::map<std::string, double> group_rates;
  double gap = 0.0;
  double overall = 0.0;
  std::optional<double> decision_independence_gap;
  std::optional<DependenceResult> sufficiency;
  std::optional<DependenceResult> separation;
};

struct MetricSettings {
  std::string outcome_level = "1";
  std::string group_1 = "1";
  std::string group_0 = "0";
};

inline RegimeMetrics regime_metrics(std::string regime, bool predicted, const JointTable& group_outcome,
                                    const MetricSettings& settings) {
  RegimeMetrics m;
  m.regime = std::move(regime);
  m.predicted = predicted;
  m.group_rates = group_rates(group_outcome, settings.outcome_level);
  m.gap = group_gap(group_outcome, settings.outcome_level, settings.group_1, settings.group_0);
  m.overall = overall_rate(group_outcome, settings.outcome_level);
  return m;
}

}  // namespace prospect
