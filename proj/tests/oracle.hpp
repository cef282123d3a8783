#pragma once

// Reference values computed without the library's own normal routines.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>

namespace oracle {

inline double Phi(double x) { return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2); }
inline double Phi_inv(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }
inline double pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline double wang(double alpha, double p) { return Phi(Phi_inv(p) + alpha); }

// E[f(m + s Z)] by adaptive Gauss-Kronrod on [-12, 12]
template <class F>
double gaussian_mean(F f, double m, double s) {
  auto integrand = [&](double z) { return f(m + s * z) * pdf(z); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -12.0, 12.0, 15, 1e-13);
}

}  // namespace oracle
