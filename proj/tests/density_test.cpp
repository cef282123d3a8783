#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "distort/density.hpp"
#include "distort/error.hpp"
#include "distort/io.hpp"
#include "distort/pde.hpp"
#include "oracle.hpp"

using namespace distort;

namespace {

double gauss(double x, double m, double v) { return std::exp(-0.5 * (x - m) * (x - m) / v) / std::sqrt(2 * M_PI * v); }

BridgeOptions small_run(std::uint32_t stream) {
  BridgeOptions o;
  o.paths = 40000;
  o.seed = 99;
  o.stream = stream;
  return o;
}

}  // namespace

TEST(GaussianField, ClosedFormValues) {
  const auto f = gaussian_field(0.3, {0.25, 1.0}, uniform_grid(-3.7, 4.3, 81));
  // x = x0 and x = x0 + 1 sit on the grid
  EXPECT_NEAR(f.rho(1.0, 0.3), 0.3989422804014327, 1e-15);
  EXPECT_NEAR(f.survival(1.0, 0.3).p, 0.5, 1e-15);
  EXPECT_NEAR(f.rho(0.25, 1.3), std::exp(-2.0) / std::sqrt(M_PI / 2), 1e-15);
  EXPECT_NEAR(f.survival(0.25, 1.3).p, 1 - oracle::Phi(2.0), 1e-15);
  EXPECT_THROW(gaussian_field(0.0, {0.0, 1.0}, uniform_grid(-1, 1, 3)), DomainError);
}

TEST(GaussianDensity, OrnsteinUhlenbeckMoments) {
  const GaussianDensity g(DiffusionSpec::ornstein_uhlenbeck(1.0, 1.0, 1.0));
  EXPECT_NEAR(g.mean(1.0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(g.variance(1.0), (1 - std::exp(-2.0)) / 2, 1e-15);
}

TEST(SurvivalPde, HeatKernel) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const std::vector<double> ts{0.01, 0.1, 0.5, 1.0};
  const auto x = uniform_grid(-8.0, 8.0, 1601);
  const auto fp = solve_survival_pde(spec, ts, x);
  const auto exact = gaussian_field(0.0, ts, x);
  double worst = 0.0;
  for (std::size_t it = 1; it < ts.size(); ++it)
    for (std::size_t ix = 0; ix < x.size(); ++ix) {
      worst = std::max(worst, std::abs(fp.rho_at(it, ix) - exact.rho_at(it, ix)));
      worst = std::max(worst, std::abs(fp.G_at(it, ix).p - exact.G_at(it, ix).p));
    }
  EXPECT_LE(worst, 1e-3);
  EXPECT_LE(fp.diagnostics.mass_error, 1e-3);
  EXPECT_LT(fp.diagnostics.projection, 1e-6);
}

TEST(SurvivalPde, ConstantDriftTranslates) {
  const double mu0 = 0.7;
  const auto spec = DiffusionSpec::constant(mu0, 0.0, 1.0);
  const std::vector<double> ts{0.05, 0.5, 1.0};
  const auto x = uniform_grid(-7.0, 9.0, 1601);
  const auto fp = solve_survival_pde(spec, ts, x);
  double worst = 0.0;
  for (std::size_t it = 1; it < ts.size(); ++it)
    for (std::size_t ix = 0; ix < x.size(); ++ix)
      worst = std::max(worst, std::abs(fp.rho_at(it, ix) - gauss(x[ix], mu0 * ts[it], ts[it])));
  EXPECT_LE(worst, 1e-3);
}

TEST(SurvivalPde, OrnsteinUhlenbeckMoments) {
  const auto spec = DiffusionSpec::ornstein_uhlenbeck(1.0, 0.0, 1.0);
  const auto x = uniform_grid(-6.0, 6.0, 1201);
  const auto fp = solve_survival_pde(spec, {0.01, 1.0}, x);
  const double dx = x[1] - x[0];
  double m0 = 0, m1 = 0, m2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = fp.rho_at(1, i) * dx;
    m0 += r;
    m1 += r * x[i];
    m2 += r * x[i] * x[i];
  }
  EXPECT_NEAR(m0, 1.0, 1e-3);
  EXPECT_NEAR(m1, 0.0, 1e-2);
  EXPECT_NEAR(m2 - m1 * m1, (1 - std::exp(-2.0)) / 2, 1e-2);
}

TEST(SurvivalPde, NarrowDomainIsRejected) {
  EXPECT_THROW(solve_survival_pde(DiffusionSpec::brownian(), {0.01, 1.0}, uniform_grid(-1.0, 1.0, 201)), NumericError);
}

TEST(Bridge, ZeroDriftIsExact) {
  const auto est = bridge_density_mc(DiffusionSpec::brownian(0.2), 0.7, 1.1, small_run(0));
  EXPECT_EQ(est.std_error, 0.0);
  EXPECT_NEAR(est.value, gauss(1.1, 0.2, 0.7), 1e-15);
}

TEST(Bridge, ConstantDrift) {
  const double mu0 = 0.5;
  const auto spec = DiffusionSpec::constant(mu0, 0.0, 1.0);
  for (double x : {-1.0, 0.0, 0.5, 2.0}) {
    const auto est = bridge_density_mc(spec, 1.0, x, small_run(1));
    EXPECT_NEAR(est.value, gauss(x, mu0, 1.0), 3 * est.std_error + 1e-12) << x;
  }
}

TEST(Bridge, OrnsteinUhlenbeck) {
  const auto spec = DiffusionSpec::ornstein_uhlenbeck(1.0, 0.0, 1.0);
  const double v = (1 - std::exp(-2.0)) / 2;
  std::uint32_t stream = 10;
  for (double x : {-1.0, 0.0, 1.0}) {
    const auto est = bridge_density_mc(spec, 1.0, x, small_run(stream++));
    EXPECT_GT(est.std_error, 0.0);
    EXPECT_NEAR(est.value, gauss(x, 0.0, v), 3 * est.std_error) << x;
  }
}

TEST(Bridge, SurvivalAddsToOne) {
  const auto spec = DiffusionSpec::tanh_drift(0.8, 1.0);
  const auto s = bridge_survival_mc(spec, 1.0, 0.3, small_run(20));
  EXPECT_NEAR(s.G.value + s.S.value, 1.0, 5 * std::hypot(s.G.std_error, s.S.std_error) + 1e-12);
}

TEST(Bridge, Deterministic) {
  const auto spec = DiffusionSpec::tanh_drift(0.8, 1.0);
  auto o = small_run(3);
  const auto a = bridge_density_mc(spec, 1.0, 0.3, o);
  o.threads = 3;
  const auto b = bridge_density_mc(spec, 1.0, 0.3, o);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_error, b.std_error);
  o.stream = 4;
  EXPECT_NE(bridge_density_mc(spec, 1.0, 0.3, o).value, a.value);
}

TEST(Bridge, MartingaleTimeChange) {
  for (double r : {0.5, 1.0, 3.0}) {
    const auto est = bridge_martingale_variance(r, small_run(30));
    EXPECT_NEAR(est.value, r, 5 * est.std_error) << r;
  }
}

TEST(TailDiagnostics, GaussianRatios) {
  const auto x = uniform_grid(-4.0, 4.0, 801);
  const auto f = gaussian_field(0.0, {1.0}, x);
  const auto tail = tail_ratio_diagnostics(f, 1.0);
  // centered log differences are exact for a Gaussian; the last interior node is |x| = 3.99
  EXPECT_NEAR(tail.max_log_slope, 3.99, 1e-9);
  EXPECT_NEAR(tail.max_ratio, 0.25 / oracle::pdf(0.0), 1e-12);
  EXPECT_NEAR(tail.max_ratio, 0.6267, 1e-4);
  EXPECT_GT(tail.min_ratio_factor, 0.0);
  // Mills ratio: G(1-G)/rho near 1/x far out
  const auto far = gaussian_field(0.0, {1.0}, {6.0, 7.0});
  const double ratio = far.G_at(0, 0).p * far.G_at(0, 0).comp / far.rho_at(0, 0);
  EXPECT_NEAR(ratio * 6.0, 1.0, 0.03);
}

TEST(FieldIo, BinaryRoundTrip) {
  const auto f = gaussian_field(0.0, {0.5, 1.0}, uniform_grid(-3.0, 3.0, 31));
  const auto path = std::filesystem::temp_directory_path() / "distort_field_roundtrip.bin";
  io::write_field_binary(path, f);
  const auto g = io::read_field_binary(path);
  ASSERT_EQ(g.nt(), 2u);
  ASSERT_EQ(g.nx(), 31u);
  for (std::size_t it = 0; it < 2; ++it)
    for (std::size_t ix = 0; ix < 31; ++ix) {
      EXPECT_EQ(g.rho_at(it, ix), f.rho_at(it, ix));
      EXPECT_EQ(g.G_at(it, ix).p, f.G_at(it, ix).p);
      EXPECT_EQ(g.G_at(it, ix).comp, f.G_at(it, ix).comp);
    }
  std::filesystem::remove(path);
}
