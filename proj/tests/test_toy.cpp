#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"

using namespace prospect;

namespace {

const Dataset& pre_sample() {
  static const Dataset d = toy::sample_pre(ToyParams{}, 1'000'000, 7);
  return d;
}

double rate_given(const Dataset& d, Level a) {
  std::size_t n = 0, y = 0;
  for (std::size_t r = 0; r < d.size(); ++r)
    if (d.at(r, 0) == a) {
      ++n;
      y += d.at(r, 4);
    }
  return static_cast<double>(y) / static_cast<double>(n);
}

}  // namespace

TEST(Rational, ParsesDecimalsAndFractions) {
  EXPECT_EQ(Rational::parse("0.35"), Rational(7, 20));
  EXPECT_EQ(Rational::parse("-0.2"), Rational(-1, 5));
  EXPECT_EQ(Rational::parse("2/3"), Rational(2, 3));
  EXPECT_EQ(Rational::parse("4/6"), Rational(2, 3));
  EXPECT_EQ(Rational::parse("3"), Rational(3));
  EXPECT_THROW(Rational::parse("abc"), ConfigError);
  EXPECT_THROW(Rational::parse("1/0"), ConfigError);
  EXPECT_THROW(Rational::parse(""), ConfigError);
  EXPECT_EQ(Rational(2, -4).to_string(), "-1/2");
}

TEST(Rational, ArithmeticIsExact) {
  EXPECT_EQ(Rational(1, 3) + Rational(1, 6), Rational(1, 2));
  EXPECT_EQ(Rational(2, 3) * Rational(3, 10), Rational(1, 5));
  EXPECT_EQ(Rational(1) - Rational(2, 3), Rational(1, 3));
  EXPECT_TRUE(Rational(11, 30) < Rational(7, 15));
}

TEST(ToyParams, RejectsBernoulliParametersOutsideTheUnitInterval) {
  ToyParams p;
  EXPECT_NO_THROW(p.validate());
  p.y_care = Rational(6, 10);  // 0.5 + 0.6 > 1
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_THROW(toy::sample_pre(p, 10, 1), ConfigError);
  ToyParams q;
  q.p_x1_slope = Rational(-3, 10);  // 0.2 - 0.3 < 0
  EXPECT_THROW(q.validate(), ConfigError);
  EXPECT_THROW(toy::sample_pre(ToyParams{}, 0, 1), ConfigError);
}

TEST(AnalyticPre, ExactCellValues) {
  const auto pre = toy::analytic_pre();
  EXPECT_NEAR(pre.event_mass({{"A", "1"}, {"X1", "1"}}), 0.30, 1e-15);
  const auto y = condition(pre.marginal({"X1", "X2", "Y"}), {{"X1", "0"}, {"X2", "0"}});
  EXPECT_NEAR(y.mass(1), 0.42, 1e-15);
  ToyParams untreated;
  untreated.pre_rate = Rational(0);
  const auto y0 = condition(toy::analytic_pre(untreated).marginal({"X1", "X2", "Y"}), {{"X1", "0"}, {"X2", "0"}});
  EXPECT_NEAR(y0.mass(1), 0.5, 1e-15);
  const auto ay = pre.marginal({"A", "Y"});
  EXPECT_NEAR(condition(ay, {{"A", "1"}}).mass(1), 0.56, 1e-15);
  EXPECT_NEAR(condition(ay, {{"A", "0"}}).mass(1), 0.44, 1e-15);
}

TEST(AnalyticPre, ExactJointSumsToOne) {
  Rational total(0);
  for (const auto& m : toy::analytic_pre_exact(ToyParams{})) total += m;
  EXPECT_EQ(total, Rational(1));
}

TEST(AnalyticPost, ExactRationals) {
  const ToyParams p;
  using toy::PaperPolicy;
  const auto flemish = toy::analytic_post_exact(p, toy::exact_paper_policy(PaperPolicy::flemish));
  EXPECT_EQ(flemish[1], Rational(13, 25));
  EXPECT_EQ(flemish[0], Rational(12, 25));
  const auto austrian = toy::analytic_post_exact(p, toy::exact_paper_policy(PaperPolicy::austrian));
  EXPECT_EQ(austrian[1], Rational(218, 375));
  EXPECT_EQ(austrian[0], Rational(51, 125));
  const auto pre = toy::analytic_post_exact(p, toy::exact_random_policy(p.pre_rate));
  EXPECT_EQ(pre[1], Rational(14, 25));
  EXPECT_EQ(pre[0], Rational(11, 25));
}

TEST(AnalyticPost, DoublePathMatchesRationalPath) {
  const ToyParams p;
  const auto pols = toy::paper_policies();
  const auto a = toy::analytic_post(p, pols.austrian);
  EXPECT_NEAR(a[1], 218.0 / 375.0, 1e-15);
  EXPECT_NEAR(a[0], 0.408, 1e-15);
}

TEST(PaperPolicies, CellsAndShares) {
  const auto pols = toy::paper_policies();
  const auto cov = toy::analytic_pre().marginal({"A", "X1", "X2"});
  EXPECT_NEAR(treated_share(pols.flemish, cov), 0.40, 1e-15);
  EXPECT_EQ(policy_prob(pols.austrian, "1", {{"A", "1"}, {"X1", "1"}, {"X2", "0"}}), 0.0);
  EXPECT_NEAR(policy_prob(pols.austrian, "1", {{"A", "0"}, {"X1", "1"}, {"X2", "0"}}), 2.0 / 3.0, 1e-16);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(pols.flemish.prob(c, 1), (c / 2) % 2 == 1 ? 1.0 : 0.0);
}

TEST(SamplePre, HeadlineFrequencies) {
  const auto& d = pre_sample();
  ASSERT_EQ(d.size(), 1'000'000u);
  EXPECT_EQ(d.provenance(), Provenance::pre);
  const auto ay = empirical_joint(d, {"A", "Y"});
  EXPECT_NEAR(ay.event_mass({{"Y", "1"}}), 0.50, 0.002);
  EXPECT_NEAR(rate_given(d, 1), 0.56, 0.003);
  EXPECT_NEAR(rate_given(d, 0), 0.44, 0.003);
  EXPECT_NEAR(empirical_joint(d, {"A", "X1"}).mass(std::vector<Level>{1, 1}), 0.30, 0.005);
}

TEST(SamplePre, SameSeedSameData) {
  const auto a = toy::sample_pre(ToyParams{}, 5000, 99);
  const auto b = toy::sample_pre(ToyParams{}, 5000, 99);
  const auto c = toy::sample_pre(ToyParams{}, 5000, 100);
  EXPECT_TRUE(std::equal(a.codes().begin(), a.codes().end(), b.codes().begin()));
  EXPECT_FALSE(std::equal(a.codes().begin(), a.codes().end(), c.codes().begin()));
}

TEST(SamplePre, EveryCellWithinFourStandardErrorsOfTheAnalyticJoint) {
  const auto& d = pre_sample();
  const auto emp = empirical_joint(d, names_of(d.schema().variables()));
  const auto exact = toy::analytic_pre();
  const double n = static_cast<double>(d.size());
  for (std::size_t c = 0; c < exact.size(); ++c) {
    const double p = exact.mass(c);
    ASSERT_LE(std::abs(emp.mass(c) - p), 4.0 * std::sqrt(p * (1 - p) / n)) << describe(exact.assignment_of(c));
  }
}

TEST(SamplePost, PaperPoliciesAndFullTreatment) {
  const ToyParams p;
  const auto pols = toy::paper_policies();
  const auto flemish = toy::sample_post(p, pols.flemish, 1'000'000, 7);
  EXPECT_EQ(flemish.provenance(), Provenance::post_simulated);
  EXPECT_NEAR(rate_given(flemish, 1), 0.52, 0.003);
  const auto austrian = toy::sample_post(p, pols.austrian, 1'000'000, 7);
  EXPECT_NEAR(rate_given(austrian, 0), 0.408, 0.003);
  const auto all = toy::to_tabular(toy::exact_random_policy(Rational(1)), "all");
  const auto treated = toy::sample_post(p, all, 1'000'000, 7);
  EXPECT_NEAR(empirical_joint(treated, {"Y"}).mass(1), 0.38, 0.003);
}

TEST(SamplePost, PrePolicyReproducesThePreSampleExactly) {
  const ToyParams p;
  const auto pre = toy::to_tabular(toy::exact_random_policy(p.pre_rate), "pre");
  const auto a = toy::sample_pre(p, 20000, 5);
  const auto b = toy::sample_post(p, pre, 20000, 5);
  EXPECT_TRUE(std::equal(a.codes().begin(), a.codes().end(), b.codes().begin()));
}

TEST(SamplePost, CovariatesDoNotDependOnThePolicy) {
  const ToyParams p;
  const auto a = toy::sample_pre(p, 20000, 13);
  const auto b = toy::sample_post(p, toy::paper_policies().austrian, 20000, 13);
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t v = 0; v < 3; ++v) ASSERT_EQ(a.at(r, v), b.at(r, v));
}

TEST(SamplePost, RejectsPoliciesOffTheToyCells) {
  const Schema other({{"A", Role::sensitive, {"0", "1"}}, {"D", Role::decision, {"0", "1"}},
                      {"Y", Role::outcome, {"0", "1"}}});
  const TabularPolicy p("p", other.cell_variables(), other[other.decision()], {0.5, 0.5, 0.5, 0.5});
  EXPECT_THROW(toy::sample_post(ToyParams{}, p, 10, 1), PolicyError);
}
