// Predicts the reemployment gap under a new allocation policy, once from the
// exact population tables and once from a simulated pre-deployment sample.

#include <cstdio>

#include "prospect/prospect.hpp"

using namespace prospect;

static void show(const char* source, const char* label, const TransportResult& r) {
  const double women = r.group("1").outcome[1];
  const double men = r.group("0").outcome[1];
  std::printf("%-10s %-9s P(Y=1|A=1) %.6f  P(Y=1|A=0) %.6f  gap %+.6f\n", source, label, women, men,
              women - men);
}

int main() {
  const ToyParams params;
  const auto policies = toy::paper_policies();

  const auto population = transport_inputs_from_joint(toy::analytic_pre(params), toy::schema());
  const auto sample = fit_transport_inputs(toy::sample_pre(params, 200'000, 11));

  for (const auto* policy : {&policies.flemish, &policies.austrian}) {
    show("exact", policy->label().c_str(), transport(population, *policy));
    show("sampled", policy->label().c_str(), transport(sample, *policy));
  }

  // A policy that treats people the historical data never shows treated is
  // refused, unless the caller accepts a partial answer.
  const auto pre = policies.flemish;
  const auto post = realize({"random-0.4", RandomSpec{0.4}}, toy::schema(), nullptr, population.group_covariates);
  const auto report = check_assumptions(pre, population.group_covariates, post);
  std::printf("\nrandom-0.4 after flemish: %zu unsupported cells\n", report.violations.size());
  for (const auto& v : report.violations)
    std::printf("  D=%s at %s\n", v.decision.c_str(), describe(v.cell).c_str());
}
