#pragma once

namespace distort::normal {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double pdf(double x);
// F(x)
double cdf(double x);
// 1 - F(x) without cancellation for large x.
double sf(double x);
// F^{-1}(p) for p in [0,1]; +-inf at the ends.
double quantile(double p);
// x with sf(x) = q.
double quantile_upper(double q);

}  // namespace distort::normal
