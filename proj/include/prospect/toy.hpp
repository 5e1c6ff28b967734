#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prospect/error.hpp"
#include "prospect/joint_table.hpp"
#include "prospect/policy.hpp"
#include "prospect/schema.hpp"

// Public-employment-service toy world: gender A, care obligation X1,
// education X2, program allocation D, long-term unemployment Y.
//
//   A  ~ Bernoulli(p_a)
//   X1 ~ Bernoulli(p_x1_base + p_x1_slope * A)
//   X2 ~ Bernoulli(p_x2)
//   D  ~ Bernoulli(pre_rate)                  (pre-deployment)
//   Y  ~ Bernoulli(y_intercept + y_care * X1 + y_education * X2 + y_treatment * D)

namespace prospect {

/// Exact fraction with 64-bit numerator and denominator, always reduced.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1) : num_(num), den_(den) { normalize(); }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  /// Accepts "3", "-0.25", "2/3".
  static Rational parse(std::string_view text) {
    auto fail = [&] { return ConfigError("'" + std::string(text) + "' is not a decimal or fraction"); };
    if (text.empty()) throw fail();
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
      const auto n = parse(text.substr(0, slash));
      const auto d = parse(text.substr(slash + 1));
      if (d.num_ == 0) throw fail();
      return n / d;
    }
    bool negative = false;
    std::size_t i = 0;
    if (text[0] == '-' || text[0] == '+') {
      negative = text[0] == '-';
      ++i;
    }
    __int128 num = 0, den = 1;
    bool digits = false, point = false;
    for (; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '.' && !point) {
        point = true;
        continue;
      }
      if (c < '0' || c > '9') throw fail();
      digits = true;
      num = num * 10 + (c - '0');
      if (point) den *= 10;
      if (num > INT64_MAX || den > INT64_MAX) throw fail();
    }
    if (!digits) throw fail();
    return Rational(static_cast<std::int64_t>(negative ? -num : num), static_cast<std::int64_t>(den));
  }

  std::string to_string() const {
    return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
  }

  friend Rational operator+(Rational a, Rational b) {
    return make(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator-(Rational a, Rational b) { return a + Rational(-b.num_, b.den_); }
  friend Rational operator*(Rational a, Rational b) {
    return make(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator/(Rational a, Rational b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return make(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
  }
  Rational& operator+=(Rational o) { return *this = *this + o; }

  friend bool operator==(Rational a, Rational b) { return a.num_ == b.num_ && a.den_ == b.den_; }
  friend bool operator<(Rational a, Rational b) {
    return static_cast<__int128>(a.num_) * b.den_ < static_cast<__int128>(b.num_) * a.den_;
  }
  friend bool operator<=(Rational a, Rational b) { return !(b < a); }
  friend bool operator>(Rational a, Rational b) { return b < a; }
  friend bool operator>=(Rational a, Rational b) { return !(a < b); }

 private:
  static Rational make(__int128 n, __int128 d) {
    if (d == 0) throw std::domain_error("rational with zero denominator");
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 a = n < 0 ? -n : n, b = d;
    while (b != 0) {
      const __int128 t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
    if (n > INT64_MAX || n < INT64_MIN || d > INT64_MAX) throw std::overflow_error("rational overflow");
    Rational r;
    r.num_ = static_cast<std::int64_t>(n);
    r.den_ = static_cast<std::int64_t>(d);
    return r;
  }

  void normalize() { *this = make(num_, den_); }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

struct ToyParams {
  Rational p_a{1, 2};
  Rational p_x1_base{1, 5};
  Rational p_x1_slope{2, 5};
  Rational p_x2{1, 5};
  Rational pre_rate{2, 5};
  Rational y_intercept{1, 2};
  Rational y_care{3, 10};
  Rational y_education{-1, 5};
  Rational y_treatment{-1, 5};

  Rational p_x1(int a) const { return p_x1_base + p_x1_slope * Rational(a); }

  Rational p_y(int x1, int x2, int d) const {
    return y_intercept + y_care * Rational(x1) + y_education * Rational(x2) + y_treatment * Rational(d);
  }

  /// Every implied Bernoulli parameter must lie in [0, 1].
  void validate() const {
    auto unit = [](Rational p, const std::string& what) {
      if (p < Rational(0) || p > Rational(1))
        throw ConfigError("toy parameter " + what + " = " + p.to_string() + " is outside [0, 1]");
    };
    unit(p_a, "P(A=1)");
    for (int a = 0; a < 2; ++a) unit(p_x1(a), "P(X1=1 | A=" + std::to_string(a) + ")");
    unit(p_x2, "P(X2=1)");
    unit(pre_rate, "P(D=1)");
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2)
        for (int d = 0; d < 2; ++d)
          unit(p_y(x1, x2, d), "P(Y=1 | X1=" + std::to_string(x1) + ", X2=" + std::to_string(x2) +
                                   ", D=" + std::to_string(d) + ")");
  }
};

namespace toy {

inline Schema schema() {
  const std::vector<std::string> binary{"0", "1"};
  return Schema({{"A", Role::sensitive, binary},
                 {"X1", Role::covariate, binary},
                 {"X2", Role::covariate, binary},
                 {"D", Role::decision, binary},
                 {"Y", Role::outcome, binary}});
}

/// P(D = 1 | A, X1, X2) as exact fractions, indexed a * 4 + x1 * 2 + x2.
using ExactPolicy = std::array<Rational, 8>;

inline std::size_t cell_index(int a, int x1, int x2) {
  return static_cast<std::size_t>(a * 4 + x1 * 2 + x2);
}

enum class PaperPolicy { flemish, austrian };

/// The two score-based allocations of the toy world, hard-coded cell by cell.
/// Flemish: everyone with a care obligation. Austrian: probability 2/3 for
/// women with (X1, X2) in {(0,0), (1,1)} and non-women in {(0,0), (1,0), (1,1)}.
inline ExactPolicy exact_paper_policy(PaperPolicy which) {
  ExactPolicy p{};
  for (int a = 0; a < 2; ++a)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2) {
        Rational treat(0);
        if (which == PaperPolicy::flemish) {
          treat = Rational(x1);
        } else {
          const bool band = a == 1 ? (x1 == x2) : !(x1 == 0 && x2 == 1);
          treat = band ? Rational(2, 3) : Rational(0);
        }
        p[cell_index(a, x1, x2)] = treat;
      }
  return p;
}

inline ExactPolicy exact_random_policy(Rational rate) {
  ExactPolicy p;
  p.fill(rate);
  return p;
}

inline TabularPolicy to_tabular(const ExactPolicy& exact, std::string label) {
  const auto s = schema();
  std::vector<double> probs(16);
  for (std::size_t c = 0; c < 8; ++c) {
    probs[c * 2 + 1] = exact[c].to_double();
    probs[c * 2 + 0] = (Rational(1) - exact[c]).to_double();
  }
  return TabularPolicy(std::move(label), s.cell_variables(), s[s.decision()], std::move(probs));
}

struct PaperPolicies {
  TabularPolicy flemish;
  TabularPolicy austrian;
};

inline PaperPolicies paper_policies() {
  return {to_tabular(exact_paper_policy(PaperPolicy::flemish), "flemish"),
          to_tabular(exact_paper_policy(PaperPolicy::austrian), "austrian")};
}

/// Exact joint over (A, X1, X2, D, Y) under a given allocation; cell order
/// matches schema() (Y fastest).
inline std::array<Rational, 32> exact_joint(const ToyParams& params, const ExactPolicy& policy) {
  params.validate();
  std::array<Rational, 32> out{};
  for (int a = 0; a < 2; ++a)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2)
        for (int d = 0; d < 2; ++d)
          for (int y = 0; y < 2; ++y) {
            const Rational pa = a ? params.p_a : Rational(1) - params.p_a;
            const Rational px1 = x1 ? params.p_x1(a) : Rational(1) - params.p_x1(a);
            const Rational px2 = x2 ? params.p_x2 : Rational(1) - params.p_x2;
            const Rational t = policy[cell_index(a, x1, x2)];
            const Rational pd = d ? t : Rational(1) - t;
            const Rational py1 = params.p_y(x1, x2, d);
            const Rational py = y ? py1 : Rational(1) - py1;
            out[static_cast<std::size_t>(((((a * 2 + x1) * 2 + x2) * 2 + d) * 2) + y)] =
                pa * px1 * px2 * pd * py;
          }
  return out;
}

inline std::array<Rational, 32> analytic_pre_exact(const ToyParams& params) {
  return exact_joint(params, exact_random_policy(params.pre_rate));
}

inline JointTable analytic_pre(const ToyParams& params = {}) {
  const auto exact = analytic_pre_exact(params);
  std::vector<double> mass(32);
  for (std::size_t i = 0; i < 32; ++i) mass[i] = exact[i].to_double();
  return JointTable(schema().variables(), std::move(mass));
}

/// Exact P(Y = 1 | A = a) for a = 0, 1 under an allocation.
inline std::array<Rational, 2> analytic_post_exact(const ToyParams& params, const ExactPolicy& policy) {
  params.validate();
  std::array<Rational, 2> out{};
  for (int a = 0; a < 2; ++a) {
    Rational sum(0);
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2) {
        const Rational px = (x1 ? params.p_x1(a) : Rational(1) - params.p_x1(a)) *
                            (x2 ? params.p_x2 : Rational(1) - params.p_x2);
        const Rational t = policy[cell_index(a, x1, x2)];
        sum += px * (t * params.p_y(x1, x2, 1) + (Rational(1) - t) * params.p_y(x1, x2, 0));
      }
    out[static_cast<std::size_t>(a)] = sum;
  }
  return out;
}

namespace detail {

inline void check_toy_policy(const TabularPolicy& policy) {
  const auto s = schema();
  if (policy.cell_variables() != s.cell_variables() || !(policy.decision() == s[s.decision()]))
    throw PolicyError("policy '" + policy.label() + "' is not defined over the toy cells (A, X1, X2)");
  if (!policy.fully_supported())
    throw PolicyError("policy '" + policy.label() + "' leaves toy cells uncovered");
}

}  // namespace detail

/// P(Y = 1 | A = a) for a = 0, 1 straight from the structural equations,
/// for any tabular allocation. Independent of the estimation tables.
inline std::array<double, 2> analytic_post(const ToyParams& params, const TabularPolicy& policy) {
  params.validate();
  detail::check_toy_policy(policy);
  std::array<double, 2> out{};
  for (int a = 0; a < 2; ++a) {
    double sum = 0.0;
    const double p1 = params.p_x1(a).to_double();
    const double p2 = params.p_x2.to_double();
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2) {
        const double px = (x1 ? p1 : 1.0 - p1) * (x2 ? p2 : 1.0 - p2);
        const double t = policy.prob(cell_index(a, x1, x2), 1);
        sum += px * (t * params.p_y(x1, x2, 1).to_double() + (1.0 - t) * params.p_y(x1, x2, 0).to_double());
      }
    out[static_cast<std::size_t>(a)] = sum;
  }
  return out;
}

/// The generator contract: std::mt19937_64 seeded with `seed`; a Bernoulli(p)
/// draw consumes one 64-bit output u and returns (u >> 11) * 2^-53 < p.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}
  bool bernoulli(double p) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return u < p;
  }

 private:
  std::mt19937_64 engine_;
};

namespace detail {

// Draws n rows in the order A, X1, X2, D, Y; `treat` gives P(D=1) per cell.
inline Dataset sample(const ToyParams& params, const std::array<double, 8>& treat, std::size_t n,
                      std::uint64_t seed, Provenance provenance) {
  params.validate();
  if (n == 0) throw ConfigError("sample size must be positive");
  const double pa = params.p_a.to_double();
  const double px1[2] = {params.p_x1(0).to_double(), params.p_x1(1).to_double()};
  const double px2 = params.p_x2.to_double();
  double py[8];
  for (int x1 = 0; x1 < 2; ++x1)
    for (int x2 = 0; x2 < 2; ++x2)
      for (int d = 0; d < 2; ++d) py[(x1 * 2 + x2) * 2 + d] = params.p_y(x1, x2, d).to_double();

  Sampler rng(seed);
  std::vector<Level> codes(n * 5);
  for (std::size_t r = 0; r < n; ++r) {
    const int a = rng.bernoulli(pa);
    const int x1 = rng.bernoulli(px1[a]);
    const int x2 = rng.bernoulli(px2);
    const int d = rng.bernoulli(treat[cell_index(a, x1, x2)]);
    const int y = rng.bernoulli(py[(x1 * 2 + x2) * 2 + d]);
    Level* row = &codes[r * 5];
    row[0] = static_cast<Level>(a);
    row[1] = static_cast<Level>(x1);
    row[2] = static_cast<Level>(x2);
    row[3] = static_cast<Level>(d);
    row[4] = static_cast<Level>(y);
  }
  return Dataset(schema(), std::move(codes), provenance);
}

}  // namespace detail

inline Dataset sample_pre(const ToyParams& params, std::size_t n, std::uint64_t seed) {
  std::array<double, 8> treat;
  treat.fill(params.pre_rate.to_double());
  return detail::sample(params, treat, n, seed, Provenance::pre);
}

/// Post-deployment world: covariates drawn exactly as before, decisions from
/// `policy`, outcomes from the unchanged structural equation.
inline Dataset sample_post(const ToyParams& params, const TabularPolicy& policy, std::size_t n,
                           std::uint64_t seed) {
  detail::check_toy_policy(policy);
  std::array<double, 8> treat;
  for (std::size_t c = 0; c < 8; ++c) treat[c] = policy.prob(c, 1);
  return detail::sample(params, treat, n, seed, Provenance::post_simulated);
}

}  // namespace toy
}  // namespace prospect
