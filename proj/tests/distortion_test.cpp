#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "distort/distortion.hpp"
#include "distort/error.hpp"
#include "distort/io.hpp"
#include "oracle.hpp"

using namespace distort;

namespace {

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * i / (n - 1));
  return v;
}

std::vector<DistortionSpec> families() {
  return {DistortionSpec::identity(),
          DistortionSpec::power(2.0),
          DistortionSpec::power(0.5),
          DistortionSpec::kahneman_tversky(0.61),
          DistortionSpec::tversky_fox(0.7, 0.6),
          DistortionSpec::prelec(1.0, 0.65),
          DistortionSpec::wang(0.5),
          DistortionSpec::wang(-0.3),
          DistortionSpec::separable({TimeWeight::Kind::Linear, 0.2, 0.3, 0.0}, DistortionSpec::power(2.0), 2.0),
          DistortionSpec::separable({TimeWeight::Kind::Exponential, 1.0, 0.1, 1.5}, DistortionSpec::wang(0.4), 1.0)};
}

}  // namespace

TEST(Distortion, PowerValue) { EXPECT_NEAR(DistortionSpec::power(2.0).eval(0.0, 0.75), 0.5625, 1e-15); }

TEST(Distortion, WangMatchesNormalShift) {
  EXPECT_NEAR(DistortionSpec::wang(0.5).eval(0.0, 0.5), oracle::Phi(0.5), 1e-14);
  EXPECT_NEAR(oracle::Phi(0.5), 0.6915, 1e-4);
  for (double p : {1e-8, 0.01, 0.3, 0.77, 0.999}) {
    EXPECT_NEAR(DistortionSpec::wang(0.8).eval(0.0, p), oracle::wang(0.8, p), 1e-12 * (1 + 1 / p)) << p;
  }
}

TEST(Distortion, ClosedForms) {
  const double p = 0.3, q = 0.7;
  const double kt = std::pow(p, 0.61) / std::pow(std::pow(p, 0.61) + std::pow(q, 0.61), 1 / 0.61);
  EXPECT_NEAR(DistortionSpec::kahneman_tversky(0.61).eval(0.0, p), kt, 1e-14);
  const double tf = 0.7 * std::pow(p, 0.6) / (0.7 * std::pow(p, 0.6) + std::pow(q, 0.6));
  EXPECT_NEAR(DistortionSpec::tversky_fox(0.7, 0.6).eval(0.0, p), tf, 1e-14);
  EXPECT_NEAR(DistortionSpec::prelec(1.0, 0.65).eval(0.0, p), std::exp(-std::pow(-std::log(p), 0.65)), 1e-14);
}

TEST(Distortion, SeparableMixesWithIdentity) {
  const auto d = DistortionSpec::separable({TimeWeight::Kind::Linear, 0.0, 0.5, 0.0}, DistortionSpec::power(2.0), 2.0);
  EXPECT_FALSE(d.time_invariant());
  // w(1) = 0.5
  EXPECT_NEAR(d.eval(1.0, 0.4), 0.4 + 0.5 * (0.16 - 0.4), 1e-15);
  EXPECT_NEAR(d.derivatives(1.0, 0.4).dt, 0.5 * (0.16 - 0.4), 1e-14);
  EXPECT_NEAR(d.eval(0.0, 0.4), 0.4, 1e-15);
}

TEST(Distortion, EndpointsAndMonotone) {
  for (const auto& d : families()) {
    for (double t : {0.0, 0.5, 1.0}) {
      EXPECT_NEAR(d.eval(t, 0.0), 0.0, 1e-15) << d.name();
      EXPECT_NEAR(d.eval(t, 1.0), 1.0, 1e-15) << d.name();
      double prev = 0.0;
      for (double p : grid(0.001, 0.999, 200)) {
        const double v = d.eval(t, p);
        EXPECT_GT(v, prev) << d.name() << " p=" << p;
        prev = v;
      }
    }
  }
}

TEST(Distortion, ComplementKeepsPrecision) {
  const auto d = DistortionSpec::power(2.0);
  EXPECT_NEAR(d.eval_complement(0.0, 1e-20) / 2e-20, 1.0, 1e-12);
  const Prob r = d.eval(0.0, Prob::of_complement(1e-18));
  EXPECT_NEAR(r.comp / 2e-18, 1.0, 1e-12);
  for (const auto& f : families()) {
    const double c = 1e-3;
    EXPECT_NEAR(f.eval_complement(0.3, c), 1.0 - f.eval(0.3, 1.0 - c), 1e-12) << f.name();
  }
}

TEST(Distortion, PowerDerivatives) {
  const auto der = DistortionSpec::power(2.0).derivatives(0.0, 0.5);
  EXPECT_NEAR(der.dp, 1.0, 1e-15);
  EXPECT_NEAR(der.dpp, 2.0, 1e-15);
  EXPECT_NEAR(der.dppp, 0.0, 1e-15);
  EXPECT_FALSE(der.clamped);
}

TEST(Distortion, WangCurvature) {
  const double a = 0.5;
  for (double p : {0.1, 0.5, 0.9}) {
    const auto der = DistortionSpec::wang(a).derivatives(0.0, p);
    EXPECT_NEAR(der.dpp / der.dp, -a / oracle::pdf(oracle::Phi_inv(p)), 1e-10) << p;
  }
}

TEST(Distortion, DerivativesMatchFiniteDifferences) {
  const double h = 1e-5;
  for (const auto& d : families()) {
    for (double t : {0.25, 0.8}) {
      for (double p : {0.05, 0.3, 0.5, 0.72, 0.95}) {
        const auto der = d.derivatives(t, p);
        const double fd1 = (d.eval(t, p + h) - d.eval(t, p - h)) / (2 * h);
        const double fd2 = (d.eval(t, p + h) - 2 * d.eval(t, p) + d.eval(t, p - h)) / (h * h);
        const auto up = d.derivatives(t, p + h), dn = d.derivatives(t, p - h);
        const double fd3 = (up.dpp - dn.dpp) / (2 * h);
        const double fdt = (d.eval(t + h, p) - d.eval(t - h, p)) / (2 * h);
        const double fdtp = (d.derivatives(t + h, p).dp - d.derivatives(t - h, p).dp) / (2 * h);
        EXPECT_NEAR(der.dp, fd1, 1e-7 * (1 + std::abs(fd1))) << d.name() << " p=" << p;
        EXPECT_NEAR(der.dpp, fd2, 2e-3 * (1 + std::abs(fd2))) << d.name() << " p=" << p;
        EXPECT_NEAR(der.dppp, fd3, 1e-5 * (1 + std::abs(fd3))) << d.name() << " p=" << p;
        EXPECT_NEAR(der.dt, fdt, 1e-8) << d.name();
        EXPECT_NEAR(der.dtp, fdtp, 1e-7) << d.name();
      }
    }
  }
}

TEST(Distortion, ParameterDomains) {
  EXPECT_THROW(DistortionSpec::kahneman_tversky(0.2), DomainError);
  EXPECT_NO_THROW(DistortionSpec::kahneman_tversky(0.28));
  EXPECT_THROW(DistortionSpec::kahneman_tversky(1.0), DomainError);
  EXPECT_THROW(DistortionSpec::power(0.0), DomainError);
  EXPECT_THROW(DistortionSpec::tversky_fox(-1.0, 0.5), DomainError);
  EXPECT_THROW(DistortionSpec::prelec(1.0, 1.0), DomainError);
  EXPECT_THROW(DistortionSpec::wang(0.5).eval(0.0, 1.5), DomainError);
  // weight leaves [0,1] before the horizon
  EXPECT_THROW(DistortionSpec::separable({TimeWeight::Kind::Linear, 0.5, 1.0, 0.0}, DistortionSpec::power(2), 1.0),
               DomainError);
}

TEST(Distortion, ValidationPowerBound) {
  const auto rep = validate_distortion(DistortionSpec::power(2.0), {0.0, 1.0}, grid(0.1, 0.9, 9));
  // |phi''/phi'| p(1-p) = 1 - p
  EXPECT_NEAR(rep.max_pp_ratio, 0.9, 1e-12);
  EXPECT_TRUE(rep.monotone);
  EXPECT_TRUE(rep.pass);
}

TEST(Distortion, ValidationPrelecAgainstSweep) {
  const auto d = DistortionSpec::prelec(1.0, 0.5);
  const auto ps = grid(0.01, 0.99, 99);
  const auto rep = validate_distortion(d, {0.0}, ps, 10.0);
  // same ratio from difference quotients of phi itself
  double sweep = 0.0;
  const double h = 1e-5;
  for (double p : ps) {
    const double d1 = (d.eval(0, p + h) - d.eval(0, p - h)) / (2 * h);
    const double d2 = (d.eval(0, p + h) - 2 * d.eval(0, p) + d.eval(0, p - h)) / (h * h);
    sweep = std::max(sweep, std::abs(d2 / d1) * p * (1 - p));
  }
  EXPECT_TRUE(std::isfinite(rep.max_pp_ratio));
  EXPECT_TRUE(std::isfinite(rep.max_ppp_ratio));
  EXPECT_NEAR(rep.max_pp_ratio, sweep, 1e-3 * sweep);
  EXPECT_TRUE(rep.pass);
}

TEST(Distortion, JsonRoundTrip) {
  for (const auto& d : families()) {
    const auto text = io::distortion_to_json(d);
    const auto back = io::distortion_from_json(text);
    EXPECT_EQ(back, d) << text;
    EXPECT_EQ(io::distortion_to_json(back), text);
  }
  EXPECT_THROW(io::distortion_from_json(R"({"family": "power"})"), Error);
  EXPECT_THROW(io::distortion_from_json(R"({"family": "cubic", "gamma": 2})"), Error);
}
