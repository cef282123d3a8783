#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <memory>
#include <string>

#include "distort/dynamics.hpp"
#include "distort/error.hpp"

namespace distort {

namespace {

double integrate_inverse_sigma(const ScalarField& sigma, double t, double x) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double y) { return 1.0 / sigma(t, y); };
  if (x == 0.0) return 0.0;
  if (x > 0.0) return gauss_kronrod<double, 15>::integrate(f, 0.0, x, 15, 1e-14);
  return -gauss_kronrod<double, 15>::integrate(f, x, 0.0, 15, 1e-14);
}

}  // namespace

double LampertiTransform::psi(double t, double x) const {
  if (original.constant_sigma) return x / *original.constant_sigma;
  return integrate_inverse_sigma(original.sigma, t, x);
}

double LampertiTransform::psi_t(double t, double x) const {
  if (original.constant_sigma) return 0.0;
  const double h = 1e-5 * std::max(1.0, t);
  if (t < h) return (psi(t + h, x) - psi(t, x)) / h;
  return (psi(t + h, x) - psi(t - h, x)) / (2.0 * h);
}

double LampertiTransform::psi_inv(double t, double xh) const {
  if (original.constant_sigma) return xh * *original.constant_sigma;
  // bracket, then Newton steps with a bisection fallback; psi_x = 1/sigma
  double guess = xh * original.s(t, 0.0);
  double lo = guess, hi = guess, step = 1.0 + std::abs(guess);
  while (psi(t, lo) > xh) lo -= (step *= 2.0);
  step = 1.0 + std::abs(guess);
  while (psi(t, hi) < xh) hi += (step *= 2.0);
  double x = std::clamp(guess, lo, hi);
  for (int k = 0; k < 200; ++k) {
    const double r = psi(t, x) - xh;
    if (std::abs(r) <= 1e-15 * (1.0 + std::abs(xh))) break;
    (r > 0.0 ? hi : lo) = x;
    double next = x - r * original.s(t, x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x) break;
    x = next;
  }
  return x;
}

double LampertiTransform::rho_from_hat(const DensityModel& hat, double t, double x) const {
  return hat.rho(t, psi(t, x)) / original.s(t, x);
}

Prob LampertiTransform::survival_from_hat(const DensityModel& hat, double t, double x) const {
  return hat.survival(t, psi(t, x));
}

LampertiTransform lamperti_transform(const DiffusionSpec& spec, const LampertiOptions& opt) {
  if (!spec.sigma || !spec.drift) throw DomainError("diffusion coefficients missing");
  const std::size_t n = std::max<std::size_t>(opt.check_points, 2);
  for (double t : {0.0, 0.5 * spec.T, spec.T}) {
    for (std::size_t k = 0; k < n; ++k) {
      const double x = spec.x0 - opt.check_halfwidth + 2.0 * opt.check_halfwidth * static_cast<double>(k) /
                                                           static_cast<double>(n - 1);
      const double s = spec.s(t, x);
      if (!(s >= opt.sigma_floor) || !std::isfinite(s)) {
        throw DomainError("sigma = " + std::to_string(s) + " below the floor " + std::to_string(opt.sigma_floor) +
                          " at (t=" + std::to_string(t) + ", x=" + std::to_string(x) + ")");
      }
    }
  }
  LampertiTransform L;
  L.original = spec;
  auto self = std::make_shared<const LampertiTransform>(L);
  DiffusionSpec& h = L.transformed;
  h.x0 = self->psi(0.0, spec.x0);
  h.T = spec.T;
  h.sigma = [](double, double) { return 1.0; };
  h.constant_sigma = 1.0;
  h.sigma_dx = [](double, double) { return 0.0; };
  h.label = "lamperti(" + (spec.label.empty() ? std::string("diffusion") : spec.label) + ")";
  if (spec.constant_sigma) {
    const double c = *spec.constant_sigma;
    if (spec.constant_drift) {
      const double b = *spec.constant_drift / c;
      h.drift = [b](double, double) { return b; };
      h.constant_drift = b;
      h.drift_antiderivative = [b](double, double y) { return b * y; };
      h.drift_antiderivative_dt = [](double, double) { return 0.0; };
      h.drift_dx = [](double, double) { return 0.0; };
      return L;
    }
    if (spec.ou_rate) {
      const double k = *spec.ou_rate;
      h.drift = [k](double, double y) { return -k * y; };
      h.ou_rate = k;
      h.drift_antiderivative = [k](double, double y) { return -0.5 * k * y * y; };
      h.drift_antiderivative_dt = [](double, double) { return 0.0; };
      h.drift_dx = [k](double, double) { return -k; };
      return L;
    }
  }
  h.drift = [self](double t, double xh) {
    const double x = self->psi_inv(t, xh);
    const auto& o = self->original;
    return self->psi_t(t, x) + o.b(t, x) / o.s(t, x) - 0.5 * o.s_x(t, x);
  };
  return L;
}

}  // namespace distort
