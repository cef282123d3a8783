#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "distort/choquet.hpp"
#include "distort/error.hpp"
#include "oracle.hpp"

using namespace distort;

TEST(Choquet, BernoulliIsPhiOfUpperMass) {
  for (const auto& d : {DistortionSpec::power(2.0), DistortionSpec::wang(0.5), DistortionSpec::prelec(1.0, 0.65)}) {
    for (double p : {0.1, 0.5, 0.8}) {
      const DiscreteRV rv({0.0, 1.0}, {p, 1 - p});
      EXPECT_NEAR(choquet_expectation(rv, d, 0.0), d.eval(0.0, 1 - p), 1e-15);
    }
  }
}

TEST(Choquet, BernoulliPowerPmf) {
  const double p = 0.3;
  const auto w = distorted_pmf(DiscreteRV({0.0, 1.0}, {p, 1 - p}), DistortionSpec::power(2.0), 0.0);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_NEAR(w[0], 1 - (1 - p) * (1 - p), 1e-15);
  EXPECT_NEAR(w[1], (1 - p) * (1 - p), 1e-15);
}

TEST(Choquet, ThreePointLaw) {
  const DiscreteRV rv({0.0, 1.0, 2.0}, {0.25, 0.5, 0.25});
  const auto w = distorted_pmf(rv, DistortionSpec::power(2.0), 0.0);
  EXPECT_NEAR(w[0], 7.0 / 16, 1e-15);
  EXPECT_NEAR(w[1], 0.5, 1e-15);
  EXPECT_NEAR(w[2], 1.0 / 16, 1e-15);
  EXPECT_NEAR(choquet_expectation(rv, DistortionSpec::power(2.0), 0.0), 0.625, 1e-15);
  EXPECT_NEAR(choquet_expectation(rv, DistortionSpec::identity(), 0.0), rv.mean(), 1e-15);
}

TEST(Choquet, Scaling) {
  const double p = 0.35;
  const auto d = DistortionSpec::kahneman_tversky(0.61);
  const DiscreteRV rv({0.0, 2.0}, {p, 1 - p});
  EXPECT_NEAR(choquet_expectation(rv, d, 0.0), 2 * d.eval(0.0, 1 - p), 1e-14);
}

TEST(Choquet, NonlinearityWitness) {
  // xi1 = 1{A}, xi2 = 1{not A}, P(A) = 1/2
  const DiscreteRV xi({0.0, 1.0}, {0.5, 0.5});
  const DiscreteRV sum({1.0}, {1.0});
  const auto sq = DistortionSpec::power(2.0), root = DistortionSpec::power(0.5);
  EXPECT_NEAR(2 * choquet_expectation(xi, sq, 0.0), 0.5, 1e-15);
  EXPECT_NEAR(2 * choquet_expectation(xi, root, 0.0), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(choquet_expectation(sum, sq, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(choquet_expectation(sum, root, 0.0), 1.0, 1e-15);
}

TEST(Choquet, FromOutcomesMergesTies) {
  const auto rv = DiscreteRV::from_outcomes({2.0, -1.0, 2.0, 0.5}, {0.1, 0.2, 0.3, 0.4});
  ASSERT_EQ(rv.size(), 3u);
  EXPECT_DOUBLE_EQ(rv.support()[0], -1.0);
  EXPECT_NEAR(rv.probs()[2], 0.4, 1e-15);
  EXPECT_NEAR(rv.tails()[1].p, 0.8, 1e-15);
  EXPECT_EQ(rv.tails()[3].p, 0.0);
}

TEST(Choquet, RejectsBadLaws) {
  EXPECT_THROW(DiscreteRV({0.0, 1.0}, {0.5, 0.4}), DomainError);
  EXPECT_THROW(DiscreteRV({1.0, 0.0}, {0.5, 0.5}), DomainError);
  EXPECT_THROW(DiscreteRV({0.0, 1.0}, {1.2, -0.2}), DomainError);
}

TEST(Choquet, MonotonicitySuite) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<DominatedPair> pairs;
  std::vector<ScaledCase> scaled;
  for (int k = 0; k < 50; ++k) {
    DominatedPair dp;
    std::vector<double> probs(5);
    double s = 0;
    for (auto& p : probs) s += (p = 0.05 + U(rng));
    for (auto& p : probs) p /= s;
    dp.probs = probs;
    for (int i = 0; i < 5; ++i) {
      dp.lower.push_back(4 * U(rng));
      dp.upper.push_back(dp.lower.back() + U(rng));
    }
    pairs.push_back(dp);
    scaled.push_back({0.5 + 3 * U(rng), DiscreteRV::from_outcomes(dp.lower, probs)});
  }
  for (const auto& d : {DistortionSpec::power(2.0), DistortionSpec::tversky_fox(0.7, 0.6), DistortionSpec::wang(1.0)}) {
    const auto rep = monotonicity_suite(d, 0.0, {0.0, 1.0, 2.5}, scaled, pairs);
    EXPECT_TRUE(rep.pass()) << d.name() << " failures " << rep.failures;
    EXPECT_GT(rep.checks, 100u);
  }
}

TEST(Choquet, RandomPmfIsAProbabilityVector) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto d = DistortionSpec::prelec(1.0, 0.65);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x, p;
    double s = 0;
    for (int i = 0; i < 6; ++i) {
      x.push_back(i + U(rng));
      p.push_back(0.01 + U(rng));
      s += p.back();
    }
    for (auto& v : p) v /= s;
    const DiscreteRV rv(x, p);
    const auto w = distorted_pmf(rv, d, 0.0);
    double total = 0, e = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      EXPECT_GE(w[i], 0.0);
      total += w[i];
      e += w[i] * x[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-13);
    EXPECT_NEAR(e, choquet_expectation(rv, d, 0.0), 1e-12);
  }
}

TEST(ChoquetDensity, UniformUnderSquare) {
  std::vector<double> x;
  for (int i = 0; i <= 2000; ++i) x.push_back(i / 2000.0);
  const auto G = MonotoneGrid::sample([](double v) { return 1 - v; }, x, Direction::Decreasing);
  const auto g = MonotoneGrid::sample([](double v) { return v; }, x, Direction::Increasing);
  const auto r = choquet_expectation_density(G, g, DistortionSpec::power(2.0), 0.0);
  EXPECT_NEAR(r.value, 1.0 / 3, 1e-6);
  EXPECT_LE(std::abs(r.value - r.stieltjes), r.agreement_bound);
}

TEST(ChoquetDensity, WangOnNormal) {
  // phi(G) is the survival of N(alpha, 1), so the value is P(Z' <= X) = Phi(alpha / sqrt 2)
  const double a = 0.7;
  std::vector<double> x;
  for (int i = 0; i <= 8000; ++i) x.push_back(-10.0 + 20.0 * i / 8000);
  const auto G = MonotoneGrid::sample([](double v) { return oracle::Phi(-v); }, x, Direction::Decreasing);
  const auto g = MonotoneGrid::sample([](double v) { return oracle::Phi(v); }, x, Direction::Increasing);
  const auto r = choquet_expectation_density(G, g, DistortionSpec::wang(a), 0.0);
  EXPECT_NEAR(r.value, oracle::Phi(a / std::sqrt(2.0)), 1e-5);
  EXPECT_LE(std::abs(r.value - r.stieltjes), r.agreement_bound);
}

TEST(ChoquetDensity, NarrowKernelRecoversDiscrete) {
  const double w = 1e-3;
  const DiscreteRV rv({0.0, 1.0}, {0.3, 0.7});
  std::vector<double> x;
  const int n = 60000;
  for (int i = 0; i <= n; ++i) x.push_back(-0.05 + 1.1 * i / n);
  auto surv = [&](double v) {
    return 0.3 * 0.5 * std::erfc(v / (w * std::sqrt(2.0))) + 0.7 * 0.5 * std::erfc((v - 1) / (w * std::sqrt(2.0)));
  };
  const auto G = MonotoneGrid::sample(surv, x, Direction::Decreasing);
  // shifted by one to stay nonnegative on the grid
  const auto g = MonotoneGrid::sample([](double v) { return v + 1; }, x, Direction::Increasing);
  const auto d = DistortionSpec::power(2.0);
  EXPECT_NEAR(choquet_expectation_density(G, g, d, 0.0).value, choquet_expectation(rv, d, 0.0) + 1, 1e-2);
}
