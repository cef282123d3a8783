#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "distort/error.hpp"
#include "distort/io.hpp"
#include "distort/tree.hpp"

#include <boost/math/tools/roots.hpp>

using namespace distort;

namespace {

const std::vector<double> kPayoff{0.0, 1.0, 2.0};

TreeModel two_period() { return TreeModel::symmetric(2, 0.0, 1.0, 1.0, 0.5); }

DistortedTree squared() { return distort_tree(two_period(), DistortionSpec::power(2.0)); }

TreeModel random_tree(std::mt19937_64& rng, std::size_t N) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> times{0.0};
  for (std::size_t i = 1; i <= N; ++i) times.push_back(times.back() + 0.2 + U(rng));
  Ragged<double> states(N + 1), up(N);
  for (std::size_t i = 0; i <= N; ++i) {
    double x = -static_cast<double>(i) + U(rng);
    for (std::size_t j = 0; j <= i; ++j) {
      states(i, j) = x;
      x += 0.3 + 2 * U(rng);
      if (i < N) up(i, j) = 0.1 + 0.8 * U(rng);
    }
  }
  return TreeModel(times, states, up);
}

std::vector<double> increasing_payoff(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> g(n + 1);
  double v = U(rng);
  for (auto& x : g) x = (v += U(rng) * U(rng));
  return g;
}

}  // namespace

TEST(Tree, SymmetricSurvival) {
  const auto G2 = survival_probabilities(two_period());
  EXPECT_NEAR(G2(2, 0).p, 1.0, 1e-15);
  EXPECT_NEAR(G2(2, 1).p, 0.75, 1e-15);
  EXPECT_NEAR(G2(2, 2).p, 0.25, 1e-15);
  const auto G3 = survival_probabilities(TreeModel::symmetric(3, 0.0, 1.0, 1.0));
  const double expect[] = {1.0, 7.0 / 8, 4.0 / 8, 1.0 / 8};
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(G3(3, j).p, expect[j], 1e-15) << j;
}

TEST(Tree, DistortedTransitions) {
  const auto dt = squared();
  EXPECT_NEAR(dt.q_up(0, 0), 0.25, 1e-12);
  EXPECT_NEAR(dt.q_up(1, 0), 5.0 / 12, 1e-12);
  EXPECT_NEAR(dt.q_up(1, 1), 0.25, 1e-12);
  EXPECT_TRUE(dt.violations().empty());
}

TEST(Tree, BackwardInduction) {
  const auto u = backward_induction(squared(), kPayoff, 2);
  EXPECT_NEAR(u(1, 0), 5.0 / 12, 1e-12);
  EXPECT_NEAR(u(1, 1), 1.25, 1e-12);
  EXPECT_NEAR(u(0, 0), 0.625, 1e-12);
}

TEST(Tree, QSurvivalFromRoot) {
  const auto q = q_conditional_survival(squared(), 0, 0, 2);
  EXPECT_NEAR(q[2].p, 1.0 / 16, 1e-12);
  EXPECT_NEAR(q[1].p, 9.0 / 16, 1e-12);
  EXPECT_NEAR(q[0].p, 1.0, 1e-12);
  // phi(1/4) = Q(X_2 >= 2)
  EXPECT_NEAR(verify_initial_consistency(squared()), 0.0, 1e-12);
}

TEST(Tree, NodePhi) {
  const auto dt = squared();
  EXPECT_NEAR(phi_at_node(dt, 1, 0, 2)(0.5), 5.0 / 12, 1e-12);
  EXPECT_NEAR(phi_at_node(dt, 1, 1, 2)(0.5), 0.25, 1e-12);
  const auto root = phi_at_node(dt, 0, 0, 2);
  EXPECT_NEAR(root(0.25), 1.0 / 16, 1e-12);
  EXPECT_NEAR(root(0.0), 0.0, 0.0);
  EXPECT_NEAR(root(1.0), 1.0, 0.0);
  EXPECT_NEAR(choquet_at_node(root, kPayoff), 0.625, 1e-12);
}

TEST(Tree, TowerTwoPeriod) {
  const auto tc = verify_tower(squared(), kPayoff, 0, 1, 2);
  EXPECT_LE(tc.max_discrepancy, 1e-12);
  EXPECT_NEAR(tc.direct.at(0), 0.625, 1e-12);
}

TEST(Tree, NaiveAndStatic) {
  const auto d = DistortionSpec::power(2.0);
  EXPECT_NEAR(naive_nested_expectation(two_period(), d, kPayoff), 0.5, 1e-12);
  EXPECT_NEAR(static_expectation(two_period(), d, kPayoff), 0.625, 1e-12);
}

TEST(Tree, IdentityIsClassical) {
  const auto tree = TreeModel::symmetric(4, 0.0, 1.0, 0.5, 0.4);
  const auto dt = distort_tree(tree, DistortionSpec::identity());
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j <= i; ++j) EXPECT_NEAR(dt.q_up(i, j), 0.4, 1e-14);
  const std::vector<double> g{0.0, 0.5, 1.0, 2.0, 3.0};
  const auto id = DistortionSpec::identity();
  EXPECT_NEAR(naive_nested_expectation(tree, id, g), static_expectation(tree, id, g), 1e-14);
}

TEST(Tree, RandomTreesSatisfyTower) {
  std::mt19937_64 rng(2024);
  const std::vector<DistortionSpec> fams{DistortionSpec::power(2.0), DistortionSpec::power(0.6),
                                         DistortionSpec::kahneman_tversky(0.61), DistortionSpec::tversky_fox(0.7, 0.6),
                                         DistortionSpec::prelec(1.0, 0.65), DistortionSpec::wang(0.5)};
  double worst = 0.0, qflow = 0.0;
  for (const auto& d : fams) {
    const auto tree = random_tree(rng, 8);
    const auto dt = distort_tree(tree, d);
    ASSERT_TRUE(dt.violations().empty()) << d.name();
    qflow = std::max(qflow, verify_initial_consistency(dt));
    for (int k = 0; k < 20; ++k) {
      const auto g = increasing_payoff(rng, 8);
      const auto u = backward_induction(dt, g, 8);
      EXPECT_NEAR(u(0, 0), choquet_at_node(phi_at_node(dt, 0, 0, 8), g), 1e-10);
      for (std::size_t r : {0u, 2u})
        for (std::size_t s : {3u, 5u}) worst = std::max(worst, verify_tower(dt, g, r, s, 8).max_discrepancy);
    }
  }
  EXPECT_LE(worst, 1e-10);
  EXPECT_LE(qflow, 1e-10);
}

TEST(Tree, PrelecQFlow) {
  const auto dt = distort_tree(TreeModel::symmetric(12, 0.0, 1.0, 1.0), DistortionSpec::prelec(1.0, 0.65));
  EXPECT_LE(verify_initial_consistency(dt), 1e-12);
}

TEST(Tree, StrictMon2) {
  const auto tree = TreeModel::symmetric(2, 0.0, 1.0, 1.0, 0.05);
  const auto d = DistortionSpec::separable({TimeWeight::Kind::Linear, 0.0, 0.5, 0.0}, DistortionSpec::power(0.2), 2.0);
  EXPECT_THROW(distort_tree(tree, d, Mon2Mode::Strict), ConsistencyError);
  const auto dt = distort_tree(tree, d, Mon2Mode::Permissive);
  ASSERT_FALSE(dt.violations().empty());
  EXPECT_EQ(dt.violations().front().i, 1u);
  EXPECT_EQ(dt.violations().front().j, 1u);
  EXPECT_GT(dt.violations().front().q_raw, 1.0);
  EXPECT_FALSE(dt.mon2_ok(1, 1));
  EXPECT_GE(dt.q_up(1, 1), 0.0);
  EXPECT_LE(dt.q_up(1, 1), 1.0);
}

TEST(Tree, TransitionsAreLocal) {
  // changing a transition below node (1,0) leaves q at (1,1) alone
  const auto d = DistortionSpec::power(2.0);
  const auto base = distort_tree(TreeModel::symmetric(3, 0.0, 1.0, 1.0), d);
  const auto bumped = distort_tree(TreeModel::symmetric(3, 0.0, 1.0, 1.0).with_up(2, 0, 0.3), d);
  EXPECT_NEAR(base.q_up(2, 2), bumped.q_up(2, 2), 1e-15);
  EXPECT_NE(base.q_up(2, 0), bumped.q_up(2, 0));
}

TEST(Tree, Crossing) {
  const auto sq = DistortionSpec::power(2.0);
  EXPECT_NEAR(crossing_tree_residual(0.5, 0.5, sq, sq), -0.125, 1e-12);
  EXPECT_NEAR(crossing_tree_residual(0.5, 0.5, DistortionSpec::identity(), DistortionSpec::identity()), 0.0, 1e-12);
  // power gamma with 0.5^gamma = 3/8
  auto f = [](double g) { return std::pow(0.5, g) - 0.375; };
  boost::math::tools::eps_tolerance<double> tol(50);
  const auto [lo, hi] = boost::math::tools::bisect(f, 1.0, 2.0, tol);
  const auto phi1 = DistortionSpec::power(0.5 * (lo + hi));
  EXPECT_NEAR(crossing_tree_residual(0.5, 0.5, phi1, sq), 0.0, 1e-12);
}

TEST(Tree, RejectsBadModels) {
  EXPECT_THROW(TreeModel::symmetric(2, 0.0, 1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(TreeModel::symmetric(0, 0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(two_period().with_state(2, 1, 5.0), DomainError);
}

TEST(Tree, JsonRoundTrip) {
  std::mt19937_64 rng(3);
  const auto tree = random_tree(rng, 5);
  const auto back = io::tree_from_json(io::tree_to_json(tree));
  ASSERT_EQ(back.periods(), 5u);
  for (std::size_t i = 0; i <= 5; ++i) {
    EXPECT_EQ(back.time(i), tree.time(i));
    for (std::size_t j = 0; j <= i; ++j) {
      EXPECT_EQ(back.state(i, j), tree.state(i, j));
      if (i < 5) EXPECT_EQ(back.up(i, j), tree.up(i, j));
    }
  }
}
