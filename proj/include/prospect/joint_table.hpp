#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prospect/cells.hpp"
#include "prospect/error.hpp"
#include "prospect/numeric.hpp"
#include "prospect/schema.hpp"

namespace prospect {

/// Dense probability table over the Cartesian product of the levels of an
/// ordered variable list. Zero-mass cells are stored explicitly.
class JointTable {
 public:
  static constexpr double kMassTolerance = 1e-9;

  JointTable(std::vector<VariableSpec> variables, std::vector<double> masses)
      : vars_(std::move(variables)), radix_(cardinalities(vars_)), mass_(std::move(masses)) {
    if (mass_.size() != radix_.size())
      throw EstimationError("joint table has " + std::to_string(mass_.size()) +
                            " masses for " + std::to_string(radix_.size()) + " cells");
    CompensatedSum total;
    for (double m : mass_) {
      if (!(m >= 0.0) || m > 1.0 + kMassTolerance)
        throw EstimationError("joint table mass outside [0, 1]");
      total += m;
    }
    if (std::abs(total.value() - 1.0) > kMassTolerance)
      throw EstimationError("joint table masses sum to " + round_trip_decimal(total.value()));
  }

  /// The table over no variables: a single cell of mass one.
  static JointTable unit() { return JointTable({}, {1.0}); }

  const std::vector<VariableSpec>& variables() const { return vars_; }
  const MixedRadix& radix() const { return radix_; }
  std::size_t size() const { return mass_.size(); }
  std::span<const double> masses() const { return mass_; }
  double mass(std::size_t flat) const { return mass_[flat]; }
  double mass(std::span<const Level> levels) const { return mass_[radix_.encode(levels)]; }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t position(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw SchemaError("joint table has no variable '" + std::string(name) + "'");
  }

  Assignment assignment_of(std::size_t flat) const {
    Assignment out;
    for (std::size_t i = 0; i < vars_.size(); ++i)
      out.emplace_back(vars_[i].name, vars_[i].levels[radix_.digit(flat, i)]);
    return out;
  }

  /// Total mass of the cells matching a partial assignment.
  double event_mass(const Assignment& event) const {
    const auto matcher = compile(event);
    CompensatedSum sum;
    for (std::size_t c = 0; c < mass_.size(); ++c)
      if (matches(matcher, c)) sum += mass_[c];
    return sum.value();
  }

  JointTable marginal(std::span<const std::string> names) const {
    std::vector<std::size_t> pos;
    std::vector<VariableSpec> kept;
    for (const auto& n : names) {
      pos.push_back(position(n));
      kept.push_back(vars_[pos.back()]);
    }
    MixedRadix out_radix(cardinalities(kept));
    std::vector<CompensatedSum> sums(out_radix.size());
    std::vector<Level> digits(pos.size());
    for (std::size_t c = 0; c < mass_.size(); ++c) {
      for (std::size_t i = 0; i < pos.size(); ++i) digits[i] = radix_.digit(c, pos[i]);
      sums[out_radix.encode(digits)] += mass_[c];
    }
    std::vector<double> out(sums.size());
    for (std::size_t i = 0; i < sums.size(); ++i) out[i] = sums[i].value();
    return JointTable(std::move(kept), std::move(out));
  }

  JointTable marginal(std::initializer_list<std::string> names) const {
    return marginal(std::span<const std::string>(names.begin(), names.size()));
  }

 private:
  friend JointTable condition(const JointTable&, const Assignment&);

  using Matcher = std::vector<std::pair<std::size_t, Level>>;

  Matcher compile(const Assignment& event) const {
    Matcher out;
    for (const auto& [name, label] : event) {
      const auto p = position(name);
      out.emplace_back(p, vars_[p].level(label));
    }
    return out;
  }

  bool matches(const Matcher& m, std::size_t flat) const {
    for (const auto& [p, level] : m)
      if (radix_.digit(flat, p) != level) return false;
    return true;
  }

  std::vector<VariableSpec> vars_;
  MixedRadix radix_;
  std::vector<double> mass_;
};

/// Relative frequencies of the level combinations of `names` in the data.
inline JointTable empirical_joint(const Dataset& data, std::span<const std::string> names) {
  if (data.empty()) throw EstimationError("cannot estimate a distribution from an empty dataset");
  std::vector<std::size_t> cols;
  std::vector<VariableSpec> vars;
  for (const auto& n : names) {
    cols.push_back(data.schema().index_of(n));
    vars.push_back(data.schema()[cols.back()]);
  }
  MixedRadix radix(cardinalities(vars));
  std::vector<std::uint64_t> counts(radix.size(), 0);
  std::vector<Level> digits(cols.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t i = 0; i < cols.size(); ++i) digits[i] = data.at(r, cols[i]);
    ++counts[radix.encode(digits)];
  }
  std::vector<double> masses(counts.size());
  const double n = static_cast<double>(data.size());
  for (std::size_t i = 0; i < counts.size(); ++i) masses[i] = static_cast<double>(counts[i]) / n;
  return JointTable(std::move(vars), std::move(masses));
}

inline JointTable empirical_joint(const Dataset& data, std::initializer_list<std::string> names) {
  return empirical_joint(data, std::span<const std::string>(names.begin(), names.size()));
}

/// Conditional distribution of the remaining variables given a partial
/// assignment. Zero-mass events raise UndefinedConditional.
inline JointTable condition(const JointTable& table, const Assignment& given) {
  const auto matcher = table.compile(given);
  std::vector<bool> fixed(table.vars_.size(), false);
  for (const auto& [p, level] : matcher) {
    (void)level;
    fixed[p] = true;
  }
  std::vector<VariableSpec> rest;
  std::vector<std::size_t> rest_pos;
  for (std::size_t i = 0; i < table.vars_.size(); ++i)
    if (!fixed[i]) {
      rest.push_back(table.vars_[i]);
      rest_pos.push_back(i);
    }

  const double event = table.event_mass(given);
  if (event == 0.0) throw UndefinedConditional(given);

  MixedRadix out_radix(cardinalities(rest));
  std::vector<double> out(out_radix.size(), 0.0);
  std::vector<Level> digits(rest_pos.size());
  for (std::size_t c = 0; c < table.mass_.size(); ++c) {
    if (!table.matches(matcher, c)) continue;
    for (std::size_t i = 0; i < rest_pos.size(); ++i) digits[i] = table.radix_.digit(c, rest_pos[i]);
    out[out_radix.encode(digits)] = table.mass_[c] / event;
  }
  return JointTable(std::move(rest), std::move(out));
}

}  // namespace prospect
