#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "distort/dynamics.hpp"
#include "distort/error.hpp"
#include "oracle.hpp"

using namespace distort;

namespace {

const double kAlpha = 0.5;

double step(double x) { return oracle::Phi((x - 0.2) / 0.3); }

MonotoneGrid step_grid() { return MonotoneGrid::sample(step, uniform_grid(-10.0, 10.0, 4001), Direction::Increasing); }

// E[g(x + alpha (sqrt t - sqrt s) + Z sqrt(t - s))]
double wang_value(double alpha, double s, double t, double x) {
  return oracle::gaussian_mean(step, x + alpha * (std::sqrt(t) - std::sqrt(s)), std::sqrt(t - s));
}

}  // namespace

TEST(Drift, IdentityReturnsB) {
  const auto spec = DiffusionSpec::constant(0.3, 0.0, 1.0);
  const auto mu = compute_mu(DistortionSpec::identity(), gaussian_field(spec, {0.2, 1.0}, uniform_grid(-3, 3, 31)),
                             spec.drift);
  for (double v : mu.mu) EXPECT_NEAR(v, 0.3, 1e-14);
}

TEST(Drift, WangIsAlphaOverTwoRootT) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const auto tg = uniform_grid(0.1, 1.0, 10), xg = uniform_grid(-4.0, 4.0, 41);
  const auto mu = compute_mu(DistortionSpec::wang(kAlpha), gaussian_field(spec, tg, xg), spec.drift);
  EXPECT_EQ(mu.untrusted, 0u);
  for (std::size_t i = 0; i < tg.size(); ++i)
    for (std::size_t j = 0; j < xg.size(); ++j) EXPECT_NEAR(mu.at(i, j), kAlpha / (2 * std::sqrt(tg[i])), 1e-6);
}

TEST(Drift, SquareAtTheMedian) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const GaussianDensity density(spec);
  const DistortedDrift mu(DistortionSpec::power(2.0), density, spec.drift);
  // -1/2 (phi''/phi')(1/2) rho = -rho(1, x0)
  EXPECT_NEAR(mu(1.0, 0.0), -oracle::pdf(0.0), 1e-12);
  EXPECT_NEAR(mu(1.0, 0.0), -0.39894, 1e-5);
}

TEST(Drift, LinearGrowth) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const auto mu = compute_mu(DistortionSpec::kahneman_tversky(0.61), GaussianDensity(spec), spec.drift,
                             uniform_grid(0.1, 1.0, 10), uniform_grid(-6.0, 6.0, 121));
  const double C = mu.growth_constant();
  EXPECT_TRUE(std::isfinite(C));
  EXPECT_LT(C, 100.0);
}

TEST(Drift, GeneralSigmaReduces) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const GaussianDensity density(spec);
  const auto tg = uniform_grid(0.2, 1.0, 5), xg = uniform_grid(-3.0, 3.0, 13);
  auto one = [](double, double) { return 1.0; };
  auto zero = [](double, double) { return 0.0; };
  const auto id = general_sigma_mu(DistortionSpec::identity(), density, spec, one, zero, tg, xg);
  for (double v : id.mu) EXPECT_NEAR(v, 0.0, 1e-14);
  const auto w = general_sigma_mu(DistortionSpec::wang(kAlpha), density, spec, one, zero, tg, xg);
  const auto ref = compute_mu(DistortionSpec::wang(kAlpha), density, spec.drift, tg, xg);
  for (std::size_t i = 0; i < tg.size(); ++i)
    for (std::size_t j = 0; j < xg.size(); ++j) {
      EXPECT_NEAR(w.at(i, j), kAlpha / (2 * std::sqrt(tg[i])), 1e-10);
      EXPECT_NEAR(w.at(i, j), ref.at(i, j), 1e-12);
    }
}

TEST(Pde, HeatSemigroup) {
  const auto sol = solve_distorted_pde([](double, double) { return 0.0; }, step_grid(), 0.1, 1.0);
  double worst = 0.0;
  for (double x = -2.0; x <= 2.0; x += 0.25) worst = std::max(worst, std::abs(sol.eval(0.1, x) - wang_value(0.0, 0.1, 1.0, x)));
  EXPECT_LE(worst, 1e-4);
  EXPECT_LE(sol.boundary_gradient, 1e-4);
}

TEST(Pde, ConstantTerminal) {
  const auto g = MonotoneGrid({-1.0, 1.0}, {0.7, 0.7}, Direction::Increasing);
  const auto sol = solve_distorted_pde([](double, double x) { return 0.3 * x; }, g, 0.2, 1.0);
  for (double v : sol.u) EXPECT_NEAR(v, 0.7, 1e-12);
}

TEST(Pde, WangClosedForm) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const GaussianDensity density(spec);
  const DistortedDrift mu(DistortionSpec::wang(kAlpha), density, spec.drift);
  PdeGrid grid;
  grid.include = {0.5};
  const auto sol = solve_distorted_pde(DriftFn(std::cref(mu)), step_grid(), 0.1, 1.0, grid);
  double worst = 0.0;
  for (double s : {0.1, 0.5})
    for (double x = -3.0; x <= 3.0; x += 0.25) worst = std::max(worst, std::abs(sol.eval(s, x) - wang_value(kAlpha, s, 1.0, x)));
  EXPECT_LE(worst, 1e-3);
  // maximum principle and monotone slices
  const auto g = step_grid();
  double over = 0.0, drop = 0.0;
  for (std::size_t i = 0; i < sol.s_grid.size(); ++i) {
    const auto u = sol.slice(i);
    for (std::size_t j = 0; j < u.size(); ++j) {
      over = std::max({over, g.front() - u[j], u[j] - g.back()});
      if (j > 0) drop = std::max(drop, u[j - 1] - u[j]);
    }
  }
  EXPECT_LE(over, 1e-12);
  EXPECT_LE(drop, 0.0);
}

TEST(Pde, TowerInContinuousTime) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const GaussianDensity density(spec);
  const DistortedDrift mu(DistortionSpec::wang(kAlpha), density, spec.drift);
  PdeGrid grid;
  grid.include = {0.5};
  const auto direct = solve_distorted_pde(DriftFn(std::cref(mu)), step_grid(), 0.2, 1.0, grid);
  const auto mid = direct.slice_grid(direct.index_of(0.5));
  const auto nested = solve_distorted_pde(DriftFn(std::cref(mu)), mid, 0.2, 0.5, grid);
  double gap = 0.0, scheme = 0.0;
  for (double x = -2.0; x <= 2.0; x += 0.25) {
    gap = std::max(gap, std::abs(direct.eval(0.2, x) - nested.eval(0.2, x)));
    scheme = std::max(scheme, std::abs(direct.eval(0.2, x) - wang_value(kAlpha, 0.2, 1.0, x)));
  }
  EXPECT_LE(gap, std::max(2 * scheme, 1e-6));
}

TEST(Pde, MultiMatchesSingle) {
  const auto mu = [](double t, double) { return 0.25 / std::sqrt(t); };
  std::vector<std::function<double(double)>> gs{step, [](double x) { return oracle::Phi(x); }};
  PdeGrid grid;
  grid.x_lo = -8;
  grid.x_hi = 8;
  grid.nx = 801;
  std::vector<double> x;
  const auto multi = solve_distorted_pde_multi(mu, gs, 0.2, 1.0, grid, x);
  ASSERT_EQ(multi.size(), 2 * x.size());
  for (std::size_t c = 0; c < 2; ++c) {
    const auto single = solve_distorted_pde(mu, MonotoneGrid::sample(gs[c], x, Direction::Increasing), 0.2, 1.0, grid);
    const auto u0 = single.slice(0);
    for (std::size_t j = 0; j < x.size(); j += 40) EXPECT_NEAR(multi[c * x.size() + j], u0[j], 1e-10);
  }
}

TEST(Pde, NarrowGridIsRejected) {
  PdeGrid grid;
  grid.x_lo = -0.5;
  grid.x_hi = 0.5;
  grid.nx = 101;
  EXPECT_THROW(solve_distorted_pde([](double, double) { return 0.0; }, step_grid(), 0.1, 1.0, grid), NumericError);
}

TEST(QDynamics, ConstantPayoff) {
  QSimOptions q;
  q.paths = 1000;
  const auto r = simulate_q_dynamics(DriftFn([](double, double) { return 0.0; }), [](double) { return 1.0; }, 0.2, 0.0, 1.0, q);
  EXPECT_EQ(r.mean, 1.0);
  EXPECT_EQ(r.std_error, 0.0);
}

TEST(QDynamics, WangMean) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const GaussianDensity density(spec);
  const DistortedDrift mu(DistortionSpec::wang(1.0), density, spec.drift);
  QSimOptions q;
  q.paths = 40000;
  q.seed = 5;
  const auto r = simulate_q_dynamics(DriftFn(std::cref(mu)), [](double x) { return x; }, 0.25, 0.0, 1.0, q);
  EXPECT_NEAR(r.mean, 0.5, 3 * r.std_error);
}

TEST(QDynamics, AgreesWithPde) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const GaussianDensity density(spec);
  const DistortedDrift mu(DistortionSpec::wang(kAlpha), density, spec.drift);
  PdeGrid grid;
  grid.include = {0.25};
  const auto sol = solve_distorted_pde(DriftFn(std::cref(mu)), step_grid(), 0.1, 1.0, grid);
  QSimOptions q;
  q.paths = 40000;
  q.seed = 8;
  const auto r = simulate_q_dynamics(DriftFn(std::cref(mu)), step, 0.25, -0.3, 1.0, q);
  EXPECT_NEAR(r.mean, sol.eval(0.25, -0.3), 3 * r.std_error + 1e-3);
}

TEST(Phi, IdentityIsDiagonal) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const GaussianDensity density(spec);
  const auto c = build_phi_curve(DistortionSpec::identity(), spec, density, 0.3, 1.0, 0.2, {0.1, 0.5, 0.9});
  for (std::size_t i = 0; i < c.p.size(); ++i) EXPECT_NEAR(c.phi[i], c.p[i], 1e-12);
}

TEST(Phi, WangClosedForm) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const GaussianDensity density(spec);
  const double s = 0.25, t = 1.0;
  const double shift = kAlpha * (std::sqrt(t) - std::sqrt(s)) / std::sqrt(t - s);
  std::vector<double> pg;
  for (int i = 1; i <= 19; ++i) pg.push_back(0.05 * i);
  for (double x : {0.0, 0.7}) {
    const auto c = build_phi_curve(DistortionSpec::wang(kAlpha), spec, density, s, t, x, pg);
    EXPECT_TRUE(c.increasing);
    EXPECT_EQ(c.p.front(), 0.0);
    EXPECT_EQ(c.phi.back(), 1.0);
    for (std::size_t i = 0; i < c.p.size(); ++i) {
      if (c.p[i] < 0.05 - 1e-12 || c.p[i] > 0.95 + 1e-12) continue;
      EXPECT_NEAR(c.phi[i], oracle::Phi(oracle::Phi_inv(c.p[i]) + shift), 1e-3) << "x=" << x << " p=" << c.p[i];
    }
  }
}

TEST(Phi, RejectsTimeZero) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const GaussianDensity density(spec);
  EXPECT_THROW(build_phi_curve(DistortionSpec::wang(kAlpha), spec, density, 0.0, 1.0, 0.0, {0.5}), DomainError);
}

TEST(Lamperti, ConstantSigmaScales) {
  const auto lt = lamperti_transform(DiffusionSpec::brownian(0.0, 1.0).with_constant_sigma(2.0));
  for (double x : {-3.0, 0.5, 4.0}) {
    EXPECT_NEAR(lt.psi(0.5, x), x / 2, 1e-12);
    EXPECT_NEAR(lt.psi_inv(0.5, x / 2), x, 1e-10);
    EXPECT_NEAR(lt.transformed.b(0.5, x), 0.0, 1e-12);
  }
  EXPECT_TRUE(lt.transformed.unit_sigma());
}

TEST(Lamperti, UnitSigmaIsIdentity) {
  const auto spec = DiffusionSpec::tanh_drift(0.8, 1.0);
  const auto lt = lamperti_transform(spec);
  for (double x : {-2.0, 0.0, 1.5}) {
    EXPECT_NEAR(lt.psi(0.3, x), x, 1e-12);
    EXPECT_NEAR(lt.transformed.b(0.3, x), spec.b(0.3, x), 1e-10);
  }
}

TEST(Lamperti, TanhSigmaRoundTrip) {
  const auto lt = lamperti_transform(DiffusionSpec::brownian(0.0, 1.0).with_tanh_sigma(1.0, 0.1));
  for (double x = -5.0; x <= 5.0; x += 0.37) EXPECT_NEAR(lt.psi_inv(0.4, lt.psi(0.4, x)), x, 1e-10);
}

TEST(Lamperti, RejectsVanishingSigma) {
  EXPECT_THROW(lamperti_transform(DiffusionSpec::brownian().with_tanh_sigma(0.5, 1.0)), DomainError);
}

TEST(Lattice, TwoPeriodSymmetricTree) {
  const auto tree = lattice_from_diffusion(DiffusionSpec::brownian(0.0, 2.0), 2);
  const auto ref = TreeModel::symmetric(2, 0.0, 1.0, 1.0, 0.5);
  for (std::size_t i = 0; i <= 2; ++i) {
    EXPECT_NEAR(tree.time(i), ref.time(i), 1e-15);
    for (std::size_t j = 0; j <= i; ++j) {
      EXPECT_NEAR(tree.state(i, j), ref.state(i, j), 1e-15);
      if (i < 2) EXPECT_NEAR(tree.up(i, j), 0.5, 1e-15);
    }
  }
}

TEST(Lattice, MomentMatch) {
  const auto spec = DiffusionSpec::tanh_drift(1.5, 0.5);
  const std::size_t N = 40;
  const auto tree = lattice_from_diffusion(spec, N);
  const double h = spec.T / N;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double p = tree.up(i, j), x = tree.state(i, j);
      const double up = tree.state(i + 1, j + 1) - x, dn = tree.state(i + 1, j) - x;
      const double m = p * up + (1 - p) * dn;
      const double b = spec.b(tree.time(i), x);
      EXPECT_NEAR(m, b * h, 1e-14);
      EXPECT_NEAR(p * up * up + (1 - p) * dn * dn - m * m, h - b * b * h * h, 1e-14);
    }
}

TEST(Lattice, CoarseStepIsRejected) {
  EXPECT_THROW(lattice_from_diffusion(DiffusionSpec::constant(3.0, 0.0, 1.0), 4), NumericError);
  EXPECT_THROW(lattice_from_diffusion(DiffusionSpec::brownian().with_constant_sigma(2.0), 4), DomainError);
}

TEST(Convergence, WangErrorsShrink) {
  const double w = 0.2, t = 0.5;
  auto g = [w](double x) { return oracle::Phi(x / w); };
  ConvergenceOptions co;
  co.reference = oracle::Phi(kAlpha * (1 - std::sqrt(t)) / std::sqrt(w * w + (1 - t)));
  const auto tab = convergence_study(DiffusionSpec::brownian(0.0, 1.0), DistortionSpec::wang(kAlpha), g, {32, 128, 512}, t,
                                     0.0, co);
  ASSERT_EQ(tab.rows.size(), 3u);
  for (std::size_t k = 1; k < 3; ++k) {
    EXPECT_LT(tab.rows[k].error, tab.rows[k - 1].error);
    EXPECT_LT(tab.rows[k].survival_error, tab.rows[k - 1].survival_error);
  }
  EXPECT_LE(tab.rows.back().error, 1e-2);
  EXPECT_TRUE(tab.monotone);
}
