#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prospect/cells.hpp"
#include "prospect/error.hpp"
#include "prospect/joint_table.hpp"
#include "prospect/numeric.hpp"
#include "prospect/schema.hpp"

namespace prospect {

/// P(target | given) over discrete cells. A given-cell is *supported* when
/// it carries positive raw mass; only supported cells identify anything.
/// With additive smoothing, unsupported cells may still hold a (smoothed)
/// distribution but stay outside the support mask.
class ConditionalTable {
 public:
  static constexpr double kTolerance = 1e-9;

  ConditionalTable(std::vector<VariableSpec> target, std::vector<VariableSpec> given,
                   std::vector<double> probabilities, std::vector<bool> has_distribution,
                   std::vector<bool> support)
      : target_(std::move(target)),
        given_(std::move(given)),
        target_radix_(cardinalities(target_)),
        given_radix_(cardinalities(given_)),
        probs_(std::move(probabilities)),
        has_dist_(std::move(has_distribution)),
        support_(std::move(support)) {
    const auto nt = target_radix_.size();
    const auto ng = given_radix_.size();
    if (probs_.size() != nt * ng || has_dist_.size() != ng || support_.size() != ng)
      throw EstimationError("conditional table dimensions do not match its variables");
    for (std::size_t g = 0; g < ng; ++g) {
      if (support_[g] && !has_dist_[g])
        throw EstimationError("supported given-cell without a distribution");
      if (!has_dist_[g]) continue;
      CompensatedSum s;
      for (std::size_t t = 0; t < nt; ++t) {
        const double p = probs_[g * nt + t];
        if (!(p >= 0.0)) throw EstimationError("negative conditional probability");
        s += p;
      }
      if (std::abs(s.value() - 1.0) > kTolerance)
        throw EstimationError("conditional distribution does not sum to one");
    }
  }

  const std::vector<VariableSpec>& target() const { return target_; }
  const std::vector<VariableSpec>& given() const { return given_; }
  const MixedRadix& target_radix() const { return target_radix_; }
  const MixedRadix& given_radix() const { return given_radix_; }
  std::size_t target_cells() const { return target_radix_.size(); }
  std::size_t given_cells() const { return given_radix_.size(); }

  bool supported(std::size_t given_cell) const { return support_[given_cell]; }
  bool has_distribution(std::size_t given_cell) const { return has_dist_[given_cell]; }
  std::size_t supported_count() const {
    return static_cast<std::size_t>(std::count(support_.begin(), support_.end(), true));
  }

  Assignment given_assignment(std::size_t given_cell) const {
    Assignment out;
    for (std::size_t i = 0; i < given_.size(); ++i)
      out.emplace_back(given_[i].name, given_[i].levels[given_radix_.digit(given_cell, i)]);
    return out;
  }

  std::span<const double> distribution(std::size_t given_cell) const {
    if (!has_dist_[given_cell])
      throw IdentificationError("no distribution for given-cell " +
                                describe(given_assignment(given_cell)));
    return std::span<const double>(probs_).subspan(given_cell * target_cells(), target_cells());
  }

  double prob(std::size_t target_cell, std::size_t given_cell) const {
    return distribution(given_cell)[target_cell];
  }

 private:
  std::vector<VariableSpec> target_;
  std::vector<VariableSpec> given_;
  MixedRadix target_radix_;
  MixedRadix given_radix_;
  std::vector<double> probs_;
  std::vector<bool> has_dist_;
  std::vector<bool> support_;
};

namespace detail {

inline void check_disjoint(std::span<const std::string> target, std::span<const std::string> given) {
  for (const auto& t : target)
    if (std::find(given.begin(), given.end(), t) != given.end())
      throw SchemaError("variable '" + t + "' is both target and given");
}

}  // namespace detail

/// Conditional table read off an exact joint table (no smoothing).
inline ConditionalTable conditional_from_joint(const JointTable& joint,
                                               std::span<const std::string> target,
                                               std::span<const std::string> given) {
  detail::check_disjoint(target, given);
  std::vector<std::string> order(given.begin(), given.end());
  order.insert(order.end(), target.begin(), target.end());
  const auto m = joint.marginal(order);
  std::vector<VariableSpec> gvars(m.variables().begin(), m.variables().begin() + given.size());
  std::vector<VariableSpec> tvars(m.variables().begin() + given.size(), m.variables().end());
  const std::size_t nt = MixedRadix(cardinalities(tvars)).size();
  const std::size_t ng = MixedRadix(cardinalities(gvars)).size();

  std::vector<double> probs(nt * ng, 0.0);
  std::vector<bool> support(ng, false);
  for (std::size_t g = 0; g < ng; ++g) {
    CompensatedSum total;
    for (std::size_t t = 0; t < nt; ++t) total += m.mass(g * nt + t);
    const double tot = total.value();
    if (tot <= 0.0) continue;
    support[g] = true;
    for (std::size_t t = 0; t < nt; ++t) probs[g * nt + t] = m.mass(g * nt + t) / tot;
  }
  return ConditionalTable(std::move(tvars), std::move(gvars), std::move(probs), support, support);
}

/// Estimates P(target | given) from counts with additive smoothing `alpha`.
/// The support mask is always the set of given-cells with a raw count.
inline ConditionalTable fit_conditional(const Dataset& data, std::span<const std::string> target,
                                        std::span<const std::string> given, double alpha = 0.0) {
  if (data.empty()) throw EstimationError("cannot estimate a distribution from an empty dataset");
  if (!(alpha >= 0.0)) throw EstimationError("smoothing must be non-negative");
  detail::check_disjoint(target, given);

  std::vector<std::size_t> gcols, tcols;
  std::vector<VariableSpec> gvars, tvars;
  for (const auto& n : given) {
    gcols.push_back(data.schema().index_of(n));
    gvars.push_back(data.schema()[gcols.back()]);
  }
  for (const auto& n : target) {
    tcols.push_back(data.schema().index_of(n));
    tvars.push_back(data.schema()[tcols.back()]);
  }
  const MixedRadix gr(cardinalities(gvars)), tr(cardinalities(tvars));
  const std::size_t nt = tr.size(), ng = gr.size();

  std::vector<std::uint64_t> counts(nt * ng, 0);
  std::vector<Level> gd(gcols.size()), td(tcols.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t i = 0; i < gcols.size(); ++i) gd[i] = data.at(r, gcols[i]);
    for (std::size_t i = 0; i < tcols.size(); ++i) td[i] = data.at(r, tcols[i]);
    ++counts[gr.encode(gd) * nt + tr.encode(td)];
  }

  std::vector<double> probs(nt * ng, 0.0);
  std::vector<bool> has(ng, false), support(ng, false);
  for (std::size_t g = 0; g < ng; ++g) {
    std::uint64_t total = 0;
    for (std::size_t t = 0; t < nt; ++t) total += counts[g * nt + t];
    support[g] = total > 0;
    if (total == 0 && alpha == 0.0) continue;
    has[g] = true;
    const double denom = static_cast<double>(total) + alpha * static_cast<double>(nt);
    for (std::size_t t = 0; t < nt; ++t)
      probs[g * nt + t] = (static_cast<double>(counts[g * nt + t]) + alpha) / denom;
  }
  return ConditionalTable(std::move(tvars), std::move(gvars), std::move(probs), std::move(has),
                          std::move(support));
}

inline ConditionalTable fit_conditional(const Dataset& data, std::initializer_list<std::string> target,
                                        std::initializer_list<std::string> given, double alpha = 0.0) {
  return fit_conditional(data, std::span<const std::string>(target.begin(), target.size()),
                         std::span<const std::string>(given.begin(), given.size()), alpha);
}

// ---------------------------------------------------------------------------
// Logistic risk model

struct LogisticOptions {
  double tol = 1e-8;               // max-norm of the mean log-likelihood gradient
  int max_iter = 100;
  double coefficient_guard = 30.0;
};

struct FitDiagnostics {
  int iterations = 0;
  double gradient_max_norm = 0.0;
  bool converged = false;
  std::size_t rows = 0;
  std::size_t distinct_rows = 0;
};

inline double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Logistic model on one-hot encoded discrete inputs. Every non-reference
/// level of every input gets one indicator; the reference is the first
/// declared level.
class RiskModel {
 public:
  struct Feature {
    std::size_t input;
    Level level;
  };

  RiskModel(std::vector<VariableSpec> inputs, double intercept, std::vector<double> coefficients,
            FitDiagnostics diagnostics = {})
      : inputs_(std::move(inputs)),
        intercept_(intercept),
        coefs_(std::move(coefficients)),
        diag_(diagnostics) {
    for (std::size_t i = 0; i < inputs_.size(); ++i)
      for (std::size_t l = 1; l < inputs_[i].cardinality(); ++l)
        features_.push_back({i, static_cast<Level>(l)});
    if (coefs_.size() != features_.size())
      throw EstimationError("risk model has " + std::to_string(coefs_.size()) +
                            " coefficients for " + std::to_string(features_.size()) +
                            " encoded features");
  }

  const std::vector<VariableSpec>& inputs() const { return inputs_; }
  const std::vector<Feature>& features() const { return features_; }
  double intercept() const { return intercept_; }
  const std::vector<double>& coefficients() const { return coefs_; }
  const FitDiagnostics& diagnostics() const { return diag_; }

  std::string feature_name(std::size_t f) const {
    const auto& v = inputs_[features_[f].input];
    return v.name + "=" + v.levels[features_[f].level];
  }

  /// `levels[i]` is the level of inputs()[i].
  double linear_predictor(std::span<const Level> levels) const {
    double eta = intercept_;
    for (std::size_t f = 0; f < features_.size(); ++f)
      if (levels[features_[f].input] == features_[f].level) eta += coefs_[f];
    return eta;
  }

  double score(std::span<const Level> levels) const { return logistic(linear_predictor(levels)); }

  double score(const Assignment& assignment) const {
    std::vector<Level> levels(inputs_.size());
    std::vector<bool> seen(inputs_.size(), false);
    for (const auto& [name, label] : assignment)
      for (std::size_t i = 0; i < inputs_.size(); ++i)
        if (inputs_[i].name == name) {
          levels[i] = inputs_[i].level(label);
          seen[i] = true;
        }
    for (std::size_t i = 0; i < inputs_.size(); ++i)
      if (!seen[i]) throw SchemaError("score needs a level for '" + inputs_[i].name + "'");
    return score(levels);
  }

 private:
  std::vector<VariableSpec> inputs_;
  std::vector<Feature> features_;
  double intercept_;
  std::vector<double> coefs_;
  FitDiagnostics diag_;
};

inline double score(const RiskModel& model, const Assignment& assignment) {
  return model.score(assignment);
}

namespace logistic_detail {

// Binomial sufficient statistics per distinct encoded input row.
struct BinomialCells {
  Eigen::MatrixXd design;  // leading intercept column
  Eigen::VectorXd trials;
  Eigen::VectorXd successes;
  double total = 0.0;
};

inline BinomialCells aggregate(const Dataset& data, std::span<const std::size_t> input_cols,
                               std::size_t target_col, const RiskModel& layout) {
  std::vector<VariableSpec> inputs;
  for (auto c : input_cols) inputs.push_back(data.schema()[c]);
  const MixedRadix radix(cardinalities(inputs));
  if (radix.size() > (std::size_t{1} << 24))
    throw EstimationError("too many distinct input rows for cell-aggregated fitting");
  std::vector<std::uint64_t> n(radix.size(), 0), s(radix.size(), 0);
  std::vector<Level> digits(input_cols.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t i = 0; i < input_cols.size(); ++i) digits[i] = data.at(r, input_cols[i]);
    const auto cell = radix.encode(digits);
    ++n[cell];
    if (data.at(r, target_col) == 1) ++s[cell];
  }
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < n.size(); ++c)
    if (n[c] > 0) present.push_back(c);

  const auto& features = layout.features();
  BinomialCells out;
  out.design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(present.size()),
                                     static_cast<Eigen::Index>(features.size() + 1));
  out.trials.resize(static_cast<Eigen::Index>(present.size()));
  out.successes.resize(static_cast<Eigen::Index>(present.size()));
  for (std::size_t row = 0; row < present.size(); ++row) {
    const auto r = static_cast<Eigen::Index>(row);
    radix.decode(present[row], digits);
    out.design(r, 0) = 1.0;
    for (std::size_t f = 0; f < features.size(); ++f)
      if (digits[features[f].input] == features[f].level)
        out.design(r, static_cast<Eigen::Index>(f + 1)) = 1.0;
    out.trials(r) = static_cast<double>(n[present[row]]);
    out.successes(r) = static_cast<double>(s[present[row]]);
  }
  out.total = static_cast<double>(data.size());
  return out;
}

inline double softplus(double eta) {
  return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

/// Mean Bernoulli log-likelihood per observation.
inline double mean_log_likelihood(const BinomialCells& cells, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = cells.design * beta;
  CompensatedSum ll;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    ll += cells.successes(i) * eta(i) - cells.trials(i) * softplus(eta(i));
  return ll.value() / cells.total;
}

inline Eigen::VectorXd mean_gradient(const BinomialCells& cells, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = cells.design * beta;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    resid(i) = cells.successes(i) - cells.trials(i) * logistic(eta(i));
  return cells.design.transpose() * resid / cells.total;
}

}  // namespace logistic_detail

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares on cell-aggregated counts. The positive class is the target's
/// second declared level.
inline RiskModel fit_logistic(const Dataset& data, std::span<const std::string> features,
                              const std::string& target, const LogisticOptions& options = {}) {
  if (data.empty()) throw EstimationError("cannot fit a risk model on an empty dataset");
  if (features.empty()) throw EstimationError("risk model needs at least one feature");
  const auto& schema = data.schema();
  const auto target_col = schema.index_of(target);
  if (schema[target_col].cardinality() != 2)
    throw EstimationError("logistic target '" + target + "' must be binary");

  std::vector<std::size_t> cols;
  std::vector<VariableSpec> inputs;
  for (const auto& f : features) {
    cols.push_back(schema.index_of(f));
    if (cols.back() == target_col) throw EstimationError("target cannot be a feature");
    inputs.push_back(schema[cols.back()]);
  }
  const RiskModel layout(inputs, 0.0, std::vector<double>(
      [&] {
        std::size_t k = 0;
        for (const auto& v : inputs) k += v.cardinality() - 1;
        return k;
      }(), 0.0));
  const auto cells = logistic_detail::aggregate(data, cols, target_col, layout);

  const auto p = cells.design.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  const double base = cells.successes.sum() / cells.total;
  if (base <= 0.0 || base >= 1.0)
    throw SeparationError("target '" + target + "' is constant; the intercept diverges");
  beta(0) = logit(base);

  FitDiagnostics diag;
  diag.rows = data.size();
  diag.distinct_rows = static_cast<std::size_t>(cells.design.rows());

  // Stop on a small gradient only once the Newton step has also collapsed;
  // under separation the gradient vanishes while the step stays O(1).
  const double step_tol = std::sqrt(options.tol);
  for (int it = 0; it < options.max_iter; ++it) {
    const Eigen::VectorXd eta = cells.design * beta;
    Eigen::VectorXd w(eta.size()), resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double mu = logistic(eta(i));
      w(i) = cells.trials(i) * mu * (1.0 - mu) / cells.total;
      resid(i) = (cells.successes(i) - cells.trials(i) * mu) / cells.total;
    }
    const Eigen::VectorXd grad = cells.design.transpose() * resid;
    const Eigen::MatrixXd hess = cells.design.transpose() * w.asDiagonal() * cells.design;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    diag.iterations = it;
    diag.gradient_max_norm = grad.lpNorm<Eigen::Infinity>();
    if (!step.allFinite())
      throw SeparationError("logistic fit is degenerate: singular information matrix");
    if (diag.gradient_max_norm <= options.tol && step.lpNorm<Eigen::Infinity>() <= step_tol) {
      diag.converged = true;
      break;
    }
    beta += step;
    for (Eigen::Index j = 0; j < p; ++j)
      if (std::abs(beta(j)) > options.coefficient_guard)
        throw SeparationError(
            "logistic coefficient for '" +
            (j == 0 ? std::string("intercept") : layout.feature_name(static_cast<std::size_t>(j - 1))) +
            "' exceeded the separation guard of " + round_trip_decimal(options.coefficient_guard));
    diag.iterations = it + 1;
  }
  if (!diag.converged)
    diag.gradient_max_norm = logistic_detail::mean_gradient(cells, beta).lpNorm<Eigen::Infinity>();

  std::vector<double> coefs(static_cast<std::size_t>(p - 1));
  for (Eigen::Index j = 1; j < p; ++j) coefs[static_cast<std::size_t>(j - 1)] = beta(j);
  return RiskModel(std::move(inputs), beta(0), std::move(coefs), diag);
}

inline RiskModel fit_logistic(const Dataset& data, std::initializer_list<std::string> features,
                              const std::string& target, const LogisticOptions& options = {}) {
  return fit_logistic(data, std::span<const std::string>(features.begin(), features.size()), target,
                      options);
}

// ---------------------------------------------------------------------------

struct ScoreMass {
  double score;
  double mass;
};

/// Inclusive lower quantile of a discrete score distribution: the smallest
/// atom whose cumulative mass reaches q. Cumulative sums are compared with a
/// relative slack of 1e-12 so that analytically exact boundaries hold.
inline double weighted_quantile(std::span<const ScoreMass> values, double q) {
  if (values.empty()) throw EstimationError("quantile of an empty score distribution");
  if (!(q >= 0.0 && q <= 1.0)) throw EstimationError("quantile level must lie in [0, 1]");
  std::vector<ScoreMass> atoms(values.begin(), values.end());
  CompensatedSum total;
  for (const auto& a : atoms) {
    if (!(a.mass >= 0.0)) throw EstimationError("negative quantile weight");
    total += a.mass;
  }
  if (!(total.value() > 0.0)) throw EstimationError("quantile weights sum to zero");
  std::stable_sort(atoms.begin(), atoms.end(),
                   [](const ScoreMass& a, const ScoreMass& b) { return a.score < b.score; });
  const double target = q * total.value() - 1e-12 * total.value();
  CompensatedSum cum;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    cum += atoms[i].mass;
    if (i + 1 < atoms.size() && atoms[i + 1].score == atoms[i].score) continue;
    if (cum.value() >= target) return atoms[i].score;
  }
  return atoms.back().score;
}

}  // namespace prospect
