#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ueq/meanfield/lab.hpp"

namespace ueq::meanfield {
namespace {

const auto kDelta0 = FiniteMeasure<double>::dirac(0.0);

PopulationEstimate homogeneous(std::initializer_list<std::pair<double, double>> actions) {
  PopulationEstimate g;
  for (const auto& [a, w] : actions) g.add(ProfilePoint{kDelta0, FiniteMeasure<double>::dirac(a)}, w);
  return g;
}

double example_one_closed_form(double a, double at) { return 2 * a * a - 4 * a * at + at * at + at; }

TEST(PopulationFlow, BernoulliHomogeneous) {
  const auto g = example_one();
  for (double a : {0.0, 0.25, 0.9, 1.0}) {
    const auto flow = population_flow(g, ProfilePoint{kDelta0, FiniteMeasure<double>::dirac(a)}.population(), 3);
    ASSERT_EQ(flow.size(), 4u);
    EXPECT_DOUBLE_EQ(flow[1].mu.mass_at(1.0), a);
    for (const auto& s : flow) EXPECT_NEAR(s.xi.total_mass(), 1.0, 1e-15);
  }
}

TEST(PopulationFlow, HeterogeneousMixture) {
  const auto xi = product(kDelta0, mix(FiniteMeasure<double>::dirac(0.0), FiniteMeasure<double>::dirac(1.0), 0.5));
  EXPECT_DOUBLE_EQ(population_flow(example_one(), xi, 1)[1].mu.mass_at(1.0), 0.5);
}

TEST(PopulationFlow, DiracTransport) {
  const auto xi = ProfilePoint{kDelta0, FiniteMeasure<double>::dirac(0.4)}.population();
  EXPECT_EQ(population_flow(example_two(), xi, 1)[1].mu, FiniteMeasure<double>::dirac(0.4));
}

TEST(PlayerFlow, Kernels) {
  const Population xi;
  EXPECT_EQ(player_flow(example_one(), xi, 0, 0.0), FiniteMeasure<double>::dirac(0.0));
  EXPECT_EQ(player_flow(example_one(), xi, 0, 0.25), (FiniteMeasure<double>{{0.0, 0.75}, {1.0, 0.25}}));
  EXPECT_EQ(player_flow(example_two(), xi, 0, 0.4), FiniteMeasure<double>::dirac(0.4));
}

TEST(MfCost, ExampleOneClosedFormValues) {
  const auto g = example_one();
  EXPECT_NEAR(mf_cost(g, homogeneous({{0.0, 1}}), 0, 1.0), 2.0, 1e-12);
  EXPECT_NEAR(mf_cost(g, homogeneous({{1.0, 1}}), 0, 0.0), 2.0, 1e-12);
  EXPECT_NEAR(mf_cost(g, homogeneous({{0.5, 1}}), 0, 0.0), 0.5, 1e-12);
  EXPECT_NEAR(mf_cost(g, homogeneous({{0.5, 1}}), 0, 1.0), 0.5, 1e-12);
}

TEST(MfCost, ExampleOnePolynomialOnGrid) {
  const auto g = example_one();
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= 10; ++j) {
      const double a = i / 10.0, at = j / 10.0;
      EXPECT_NEAR(mf_cost(g, homogeneous({{a, 1}}), 0, at), example_one_closed_form(a, at), 1e-12);
    }
  }
}

TEST(MfCost, LinearInGamma) {
  const auto g = example_one();
  const auto mixed = homogeneous({{0.2, 0.3}, {0.7, 0.7}});
  for (double at : {0.0, 0.4, 1.0}) {
    EXPECT_NEAR(mf_cost(g, mixed, 0, at),
                0.3 * example_one_closed_form(0.2, at) + 0.7 * example_one_closed_form(0.7, at), 1e-12);
  }
}

TEST(MfCost, ExampleTwoBoundaryIncludesHalf) {
  const auto g = example_two();
  EXPECT_EQ(mf_cost(g, homogeneous({{0.5, 1}}), 0, 1.0), 1.0);
  EXPECT_EQ(mf_cost(g, homogeneous({{0.6, 1}}), 0, 1.0), -1.0);
  EXPECT_EQ(mf_cost(g, homogeneous({{0.6, 1}}), 0, 0.0), 0.0);
}

TEST(BestResponse, FlipsAcrossHalf) {
  const auto g = example_one();
  Rng rng(1);
  for (int k = 0; k <= 100; ++k) {
    const double m = k / 100.0;
    if (m == 0.5) continue;
    const auto gamma = homogeneous({{0.0, 1 - m}, {1.0, m}});
    EXPECT_EQ(best_response(g, gamma, rng), m < 0.5 ? 1.0 : 0.0) << m;
  }
}

TEST(BestResponse, ExampleTwoAboveHalfPicksZero) {
  Rng rng(2);
  EXPECT_EQ(best_response(example_two(), homogeneous({{0.8, 1}}), rng), 0.0);
  EXPECT_EQ(best_response(example_two(), homogeneous({{0.3, 1}}), rng), 1.0);
}

TEST(BestResponse, TieUsesFairCoin) {
  const auto g = example_one();
  const auto gamma = homogeneous({{0.5, 1}});
  Rng rng(3);
  int ones = 0;
  for (int n = 0; n < 4000; ++n) ones += best_response(g, gamma, rng) == 1.0;
  // Standard deviation of the count is about 32.
  EXPECT_NEAR(ones, 2000, 200);
}

TEST(BestResponse, GridFallbackForConcaveCost) {
  OneStepGame g = example_one();
  g.cost = CostRule::kQuadratic;
  g.quadratic = {0, 0, 0, -1, 0.6};  // F = −a² + 0.6a peaks at 0.3
  Rng rng(4);
  EXPECT_NEAR(best_response(g, homogeneous({{0.0, 1}}), rng), 0.3, 1e-12);
}

TEST(LearningStep, Extremes) {
  const auto gamma = homogeneous({{0.9, 1}});
  EXPECT_EQ(learning_step(gamma, kDelta0, 1.0, 1.0), homogeneous({{1.0, 1}}));
  EXPECT_EQ(learning_step(gamma, kDelta0, 1.0, 0.0), gamma);
  EXPECT_THROW((void)learning_step(gamma, kDelta0, 1.0, 1.5), std::invalid_argument);
}

TEST(LearningStep, PriorWeightDecaysGeometrically) {
  const double c = 0.25;  // finite binary expansion
  const auto run = run_mean_field(example_one(), 0.9, c, 40, 5, CostVariant::kAveraged, false);
  for (const auto& it : run.iterates) {
    const ProfilePoint prior{kDelta0, FiniteMeasure<double>::dirac(0.9)};
    EXPECT_NEAR(it.gamma.mass_at(prior), std::pow(1 - c, it.iter), 1e-12);
  }
}

TEST(LearningStep, WeightsFollowClosedFormPattern) {
  const double c = 0.375;
  const int n = 30;
  const auto run = run_mean_field(example_one(), 0.9, c, n + 1, 6, CostVariant::kAveraged, false);
  const auto& last = run.iterates.back().gamma;
  double w0 = 0, w1 = 0;
  for (int j = 0; j < n; ++j) {
    const double w = c * std::pow(1 - c, n - 1 - j);
    (run.iterates[static_cast<std::size_t>(j)].best == 0.0 ? w0 : w1) += w;
  }
  EXPECT_NEAR(last.mass_at(ProfilePoint{kDelta0, FiniteMeasure<double>::dirac(0.0)}), w0, 1e-12);
  EXPECT_NEAR(last.mass_at(ProfilePoint{kDelta0, FiniteMeasure<double>::dirac(1.0)}), w1, 1e-12);
}

TEST(LearningStep, PruningKeepsMassOne) {
  const auto run = run_mean_field(example_one(), 0.9, 0.3, 300, 7);
  for (const auto& it : run.iterates) EXPECT_NEAR(it.gamma.total_mass(), 1.0, 1e-12);
  // The prior weight 0.7^n falls below the threshold near n = 78.
  EXPECT_EQ(run.iterates.back().gamma.size(), 2u);
}

TEST(ScalarRecursion, TailStaysInBand) {
  for (double c : {0.1, 0.2, 0.3}) {
    const auto m = scalar_recursion(0.9, c, 500);
    for (std::size_t n = 100; n < m.size(); ++n) {
      EXPECT_GE(m[n], 0.5 - c);
      EXPECT_LE(m[n], 0.5 + c);
    }
  }
}

TEST(RunMeanField, ExampleOneMatchesScalarRecursion) {
  const auto run = run_mean_field(example_one(), 0.9, 0.3, 500, 8);
  const auto m = scalar_recursion(0.9, 0.3, 500);
  ASSERT_EQ(run.iterates.size(), m.size());
  for (std::size_t n = 0; n < m.size(); ++n) {
    EXPECT_NEAR(run.iterates[n].m, m[n], 1e-12) << n;
    if (n + 1 < m.size()) {
      EXPECT_NEAR(m[n + 1], 0.3 * run.iterates[n].best + 0.7 * m[n], 1e-12);
    }
  }
  const auto [zeros, ones] = tail_counts(run, 400);
  EXPECT_GE(zeros, 50);
  EXPECT_GE(ones, 50);
}

TEST(RunMeanField, ExampleTwoOscillates) {
  const auto run = run_mean_field(example_two(), 0.9, 0.3, 500, 9);
  const auto [zeros, ones] = tail_counts(run, 400);
  EXPECT_GE(zeros, 50);
  EXPECT_GE(ones, 50);
}

TEST(RunMeanField, FullReplacementAlternates) {
  const auto run = run_mean_field(example_one(), 0.9, 1.0, 20, 10);
  for (std::size_t n = 0; n < run.iterates.size(); ++n) {
    EXPECT_EQ(run.iterates[n].best, n % 2 == 0 ? 0.0 : 1.0);
  }
}

TEST(RunMeanField, RecurrenceToBothDiracs) {
  const auto run = run_mean_field(example_one(), 0.9, 0.3, 500, 11);
  const auto rec = recurrence_summary(run);
  EXPECT_EQ(rec.to_zero.min_distance_tail, 0.0);
  EXPECT_EQ(rec.to_one.min_distance_tail, 0.0);
  EXPECT_DOUBLE_EQ(rec.to_mixture.min_distance_tail, 0.5);
  for (const auto& r : run.stats.per_age()) EXPECT_EQ(r.regret, 0.0);
}

TEST(RunMeanField, DeterministicPerSeed) {
  const auto a = run_mean_field(example_one(), 0.5, 0.3, 100, 12);
  const auto b = run_mean_field(example_one(), 0.5, 0.3, 100, 12);
  for (std::size_t n = 0; n < a.iterates.size(); ++n) EXPECT_EQ(a.iterates[n].best, b.iterates[n].best);
}

TEST(FictitiousCost, DiracMatchesMfCost) {
  const auto g = example_one();
  const auto gamma = homogeneous({{0.3, 1}});
  for (double at : {0.0, 0.5, 1.0}) EXPECT_DOUBLE_EQ(fictitious_cost(g, gamma, 0, at), mf_cost(g, gamma, 0, at));
}

TEST(FictitiousCost, ExampleOneHalfMixture) {
  const auto g = example_one();
  const auto gamma = homogeneous({{0.0, 0.5}, {1.0, 0.5}});
  for (double at : {0.0, 0.25, 0.5, 1.0}) {
    EXPECT_NEAR(fictitious_cost(g, gamma, 0, at), 0.5 - at + at * at, 1e-12);
    EXPECT_NEAR(mf_cost(g, gamma, 0, at), 1.0 - at + at * at, 1e-12);
  }
}

TEST(FictitiousCost, LinearCostAgreesWithMfCost) {
  OneStepGame g = example_one();
  g.cost = CostRule::kQuadratic;
  g.quadratic = {0, 0, 1.5, 1, -2};
  Rng rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 50; ++k) {
    const auto gamma = homogeneous({{u(rng), 0.2}, {u(rng), 0.5}, {u(rng), 0.3}});
    const double at = u(rng);
    EXPECT_NEAR(fictitious_cost(g, gamma, 0, at), mf_cost(g, gamma, 0, at), 1e-12);
  }
}

TEST(RelaxedEquilibrium, ExampleOne) {
  const auto g = example_one();
  EXPECT_TRUE(relaxed_equilibrium_check(g, mix(FiniteMeasure<double>::dirac(0.0), FiniteMeasure<double>::dirac(1.0), 0.5)));
  EXPECT_FALSE(relaxed_equilibrium_check(g, FiniteMeasure<double>::dirac(0.0)));
  EXPECT_FALSE(relaxed_equilibrium_check(g, FiniteMeasure<double>::dirac(1.0)));
}

TEST(RelaxedEquilibrium, ExampleTwoHasNone) {
  const auto g = example_two();
  for (int k = 0; k <= 100; ++k) {
    const double p = k / 100.0;
    EXPECT_FALSE(relaxed_equilibrium_check(g, FiniteMeasure<double>::dirac(p))) << p;
    EXPECT_FALSE(relaxed_equilibrium_check(
        g, mix(FiniteMeasure<double>::dirac(0.0), FiniteMeasure<double>::dirac(1.0), p)))
        << p;
  }
}

TEST(Csv, HeaderAndAtoms) {
  std::ostringstream os;
  write_csv(os, run_mean_field(example_one(), 0.9, 1.0, 3, 14));
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "iter,m,best,gamma_atoms");
  std::getline(is, line);
  EXPECT_EQ(line, "0,0.90000000000000002,0,0.90000000000000002:1");
}

}  // namespace
}  // namespace ueq::meanfield
