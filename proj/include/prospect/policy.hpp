#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "prospect/cells.hpp"
#include "prospect/error.hpp"
#include "prospect/estimation.hpp"
#include "prospect/joint_table.hpp"
#include "prospect/numeric.hpp"
#include "prospect/schema.hpp"

namespace prospect {

/// P(D | A, X) as an explicit table over the (a, x) cell space. The cell
/// index is the mixed-radix encoding of (sensitive, covariates...).
///
/// Cells can be marked unsupported only for policies estimated from data
/// where the cell was never observed; such cells hold no distribution.
class TabularPolicy {
 public:
  static constexpr double kTolerance = 1e-12;

  TabularPolicy(std::string label, std::vector<VariableSpec> cell_variables, VariableSpec decision,
                std::vector<double> probabilities, std::vector<bool> supported = {})
      : label_(std::move(label)),
        cell_vars_(std::move(cell_variables)),
        decision_(std::move(decision)),
        radix_(cardinalities(cell_vars_)),
        probs_(std::move(probabilities)),
        supported_(std::move(supported)) {
    if (cell_vars_.empty()) throw PolicyError("policy needs at least the sensitive attribute");
    if (supported_.empty()) supported_.assign(radix_.size(), true);
    const auto nd = decision_.cardinality();
    if (probs_.size() != radix_.size() * nd || supported_.size() != radix_.size())
      throw PolicyError("policy table for '" + label_ + "' does not cover the cell space");
    for (std::size_t c = 0; c < radix_.size(); ++c) {
      if (!supported_[c]) continue;
      double sum = 0.0;
      for (std::size_t d = 0; d < nd; ++d) {
        const double p = probs_[c * nd + d];
        if (!(p >= 0.0 && p <= 1.0))
          throw PolicyError("policy '" + label_ + "' has a probability outside [0, 1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kTolerance)
        throw PolicyError("policy '" + label_ + "' decision distribution at " +
                          describe(cell_assignment(c)) + " sums to " + round_trip_decimal(sum));
    }
  }

  const std::string& label() const { return label_; }
  const std::vector<VariableSpec>& cell_variables() const { return cell_vars_; }
  const VariableSpec& decision() const { return decision_; }
  const MixedRadix& cell_radix() const { return radix_; }
  std::size_t cells() const { return radix_.size(); }
  std::size_t decisions() const { return decision_.cardinality(); }
  /// Number of (a, x) cells per group: the covariate cell count.
  std::size_t covariate_cells() const { return radix_.size() / cell_vars_[0].cardinality(); }

  std::size_t cell_of(Level a, std::size_t x_cell) const { return a * covariate_cells() + x_cell; }

  std::size_t cell_of(Level a, std::span<const Level> x) const {
    std::vector<Level> digits{a};
    digits.insert(digits.end(), x.begin(), x.end());
    return radix_.encode(digits);
  }

  Assignment cell_assignment(std::size_t cell) const {
    Assignment out;
    for (std::size_t i = 0; i < cell_vars_.size(); ++i)
      out.emplace_back(cell_vars_[i].name, cell_vars_[i].levels[radix_.digit(cell, i)]);
    return out;
  }

  bool supported(std::size_t cell) const { return supported_[cell]; }
  bool fully_supported() const {
    return std::find(supported_.begin(), supported_.end(), false) == supported_.end();
  }

  double prob(std::size_t cell, Level d) const {
    if (!supported_[cell])
      throw PolicyError("policy '" + label_ + "' has no decision distribution at " +
                        describe(cell_assignment(cell)));
    return probs_[cell * decisions() + d];
  }

  /// Probability of d at the cell, reading an unsupported cell as zero mass.
  double mass_or_zero(std::size_t cell, Level d) const {
    return supported_[cell] ? probs_[cell * decisions() + d] : 0.0;
  }

  TabularPolicy relabeled(std::string label) const {
    TabularPolicy copy = *this;
    copy.label_ = std::move(label);
    return copy;
  }

 private:
  std::string label_;
  std::vector<VariableSpec> cell_vars_;
  VariableSpec decision_;
  MixedRadix radix_;
  std::vector<double> probs_;
  std::vector<bool> supported_;
};

inline double policy_prob(const TabularPolicy& policy, Level d, Level a, std::span<const Level> x) {
  return policy.prob(policy.cell_of(a, x), d);
}

inline double policy_prob(const TabularPolicy& policy, const std::string& d, const Assignment& cell) {
  std::vector<Level> digits(policy.cell_variables().size());
  std::vector<bool> seen(digits.size(), false);
  for (const auto& [name, label] : cell)
    for (std::size_t i = 0; i < digits.size(); ++i)
      if (policy.cell_variables()[i].name == name) {
        digits[i] = policy.cell_variables()[i].level(label);
        seen[i] = true;
      }
  for (std::size_t i = 0; i < digits.size(); ++i)
    if (!seen[i]) throw SchemaError("policy lookup needs '" + policy.cell_variables()[i].name + "'");
  return policy.prob(policy.cell_radix().encode(digits), policy.decision().level(d));
}

// ---------------------------------------------------------------------------
// Policy descriptions

/// Every cell treated with probability `rate`.
struct RandomSpec {
  double rate = 0.0;
};

/// Treat cells whose score lies strictly above the q-th population
/// percentile (or, with treat_above = false, the complementary cells).
struct ThresholdSpec {
  double q = 0.5;
  bool treat_above = true;
  std::shared_ptr<const RiskModel> model;  // falls back to the model passed to realize()
};

/// Treat with probability `thinning` the cells whose score lies in
/// [quantile(q_low), quantile(q_high)], endpoints inclusive.
struct BandSpec {
  double q_low = 0.0;
  double q_high = 1.0;
  double thinning = 1.0;
  std::shared_ptr<const RiskModel> model;
};

struct TableSpec {
  TabularPolicy table;
};

struct PolicySpec {
  std::string label;
  std::variant<RandomSpec, ThresholdSpec, BandSpec, TableSpec> kind;
};

inline bool is_score_based(const PolicySpec& spec) {
  return std::holds_alternative<ThresholdSpec>(spec.kind) ||
         std::holds_alternative<BandSpec>(spec.kind);
}

inline void validate(const PolicySpec& spec) {
  auto unit = [&](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0))
      throw PolicyError("policy '" + spec.label + "': " + what + " must lie in [0, 1]");
  };
  if (auto* r = std::get_if<RandomSpec>(&spec.kind)) unit(r->rate, "rate");
  if (auto* t = std::get_if<ThresholdSpec>(&spec.kind)) unit(t->q, "q");
  if (auto* b = std::get_if<BandSpec>(&spec.kind)) {
    unit(b->q_low, "q_low");
    unit(b->q_high, "q_high");
    unit(b->thinning, "thinning");
    if (!(b->q_low < b->q_high)) throw PolicyError("policy '" + spec.label + "': q_low must be below q_high");
  }
}

/// Scores every (a, x) cell of the schema. Model inputs are matched to the
/// cell variables by name.
inline std::vector<double> cell_scores(const RiskModel& model, std::span<const VariableSpec> cell_vars) {
  std::vector<std::size_t> pos;
  for (const auto& in : model.inputs()) {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < cell_vars.size(); ++i)
      if (cell_vars[i].name == in.name) found = i;
    if (!found)
      throw PolicyError("risk model input '" + in.name +
                        "' is not a sensitive or covariate variable of the schema");
    if (cell_vars[*found].levels != in.levels)
      throw PolicyError("risk model input '" + in.name + "' does not match the schema levels");
    pos.push_back(*found);
  }
  const MixedRadix radix(cardinalities(cell_vars));
  std::vector<double> scores(radix.size());
  std::vector<Level> digits(pos.size());
  for (std::size_t c = 0; c < radix.size(); ++c) {
    for (std::size_t i = 0; i < pos.size(); ++i) digits[i] = radix.digit(c, pos[i]);
    scores[c] = model.score(digits);
  }
  return scores;
}

namespace detail {

inline void check_covariate_dist(const JointTable& dist, const std::vector<VariableSpec>& cell_vars) {
  if (dist.variables() != cell_vars)
    throw SchemaError("covariate distribution must be over (sensitive, covariates...) in schema order");
}

}  // namespace detail

/// Materializes a policy description into an explicit table.
inline TabularPolicy realize(const PolicySpec& spec, const Schema& schema, const RiskModel* model,
                             const JointTable& covariate_dist) {
  validate(spec);
  const auto cell_vars = schema.cell_variables();
  const auto& decision = schema[schema.decision()];
  const MixedRadix radix(cardinalities(cell_vars));
  const std::size_t nd = decision.cardinality();

  if (auto* table = std::get_if<TableSpec>(&spec.kind)) {
    if (table->table.cell_variables() != cell_vars || !(table->table.decision() == decision))
      throw PolicyError("tabular policy '" + spec.label + "' does not match the schema");
    if (!table->table.fully_supported())
      throw PolicyError("tabular policy '" + spec.label + "' must cover every cell");
    return table->table.relabeled(spec.label);
  }

  if (nd != 2)
    throw PolicyError("policy '" + spec.label + "' is binary but decision '" + decision.name +
                      "' has " + std::to_string(nd) + " levels");
  std::vector<double> treat(radix.size(), 0.0);

  if (auto* r = std::get_if<RandomSpec>(&spec.kind)) {
    std::fill(treat.begin(), treat.end(), r->rate);
  } else {
    const RiskModel* m = model;
    if (auto* t = std::get_if<ThresholdSpec>(&spec.kind); t && t->model) m = t->model.get();
    if (auto* b = std::get_if<BandSpec>(&spec.kind); b && b->model) m = b->model.get();
    if (!m) throw PolicyError("score-based policy '" + spec.label + "' needs a risk model");
    detail::check_covariate_dist(covariate_dist, cell_vars);

    const auto scores = cell_scores(*m, cell_vars);
    std::vector<ScoreMass> atoms(scores.size());
    for (std::size_t c = 0; c < scores.size(); ++c) atoms[c] = {scores[c], covariate_dist.mass(c)};

    if (auto* t = std::get_if<ThresholdSpec>(&spec.kind)) {
      const double cut = weighted_quantile(atoms, t->q);
      for (std::size_t c = 0; c < scores.size(); ++c) {
        const bool above = scores[c] > cut;
        treat[c] = (above == t->treat_above) ? 1.0 : 0.0;
      }
    } else {
      const auto& b = std::get<BandSpec>(spec.kind);
      const double lo = weighted_quantile(atoms, b.q_low);
      const double hi = weighted_quantile(atoms, b.q_high);
      for (std::size_t c = 0; c < scores.size(); ++c)
        treat[c] = (lo <= scores[c] && scores[c] <= hi) ? b.thinning : 0.0;
    }
  }

  std::vector<double> probs(radix.size() * 2);
  for (std::size_t c = 0; c < radix.size(); ++c) {
    probs[c * 2 + 0] = 1.0 - treat[c];
    probs[c * 2 + 1] = treat[c];
  }
  return TabularPolicy(spec.label, cell_vars, decision, std::move(probs));
}

/// Population share receiving any decision other than the first declared
/// (reference) level.
inline double treated_share(const TabularPolicy& policy, const JointTable& covariate_dist) {
  detail::check_covariate_dist(covariate_dist, policy.cell_variables());
  CompensatedSum share;
  for (std::size_t c = 0; c < policy.cells(); ++c) {
    const double m = covariate_dist.mass(c);
    if (m == 0.0) continue;
    share += m * (1.0 - policy.prob(c, 0));
  }
  return share.value();
}

/// Per-cell empirical distribution of the decision given (A, X). Cells never
/// observed are left unsupported.
inline TabularPolicy empirical_policy(const Dataset& data, std::string label = "pre-empirical") {
  const auto& schema = data.schema();
  const auto cell_vars = schema.cell_variables();
  const auto& decision = schema[schema.decision()];
  const MixedRadix radix(cardinalities(cell_vars));
  const std::size_t nd = decision.cardinality();

  std::vector<std::size_t> cols{schema.sensitive()};
  cols.insert(cols.end(), schema.covariates().begin(), schema.covariates().end());
  std::vector<std::uint64_t> counts(radix.size() * nd, 0);
  std::vector<Level> digits(cols.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t i = 0; i < cols.size(); ++i) digits[i] = data.at(r, cols[i]);
    ++counts[radix.encode(digits) * nd + data.at(r, schema.decision())];
  }
  std::vector<double> probs(counts.size(), 0.0);
  std::vector<bool> supported(radix.size(), false);
  for (std::size_t c = 0; c < radix.size(); ++c) {
    std::uint64_t total = 0;
    for (std::size_t d = 0; d < nd; ++d) total += counts[c * nd + d];
    if (total == 0) continue;
    supported[c] = true;
    for (std::size_t d = 0; d < nd; ++d)
      probs[c * nd + d] = static_cast<double>(counts[c * nd + d]) / static_cast<double>(total);
  }
  return TabularPolicy(std::move(label), cell_vars, decision, std::move(probs), std::move(supported));
}

}  // namespace prospect
