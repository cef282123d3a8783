#pragma once

#include <functional>
#include <vector>

#include "distort/distortion.hpp"

namespace distort {

class DiscreteRV {
 public:
  // support strictly increasing, probs positive and summing to 1 within 1e-12
  DiscreteRV(std::vector<double> support, std::vector<double> probs);
  // Unordered outcome values with their probabilities; equal values are merged.
  static DiscreteRV from_outcomes(const std::vector<double>& values, const std::vector<double>& probs);

  std::size_t size() const { return support_.size(); }
  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& probs() const { return probs_; }
  // P(eta >= x_k), k = 0..n; entry n is zero.
  const std::vector<Prob>& tails() const { return tails_; }
  double mean() const;

 private:
  std::vector<double> support_;
  std::vector<double> probs_;
  std::vector<Prob> tails_;
};

double choquet_expectation(const DiscreteRV& rv, const DistortionSpec& d, double t);
std::vector<double> distorted_pmf(const DiscreteRV& rv, const DistortionSpec& d, double t);

enum class Direction { Increasing, Decreasing };

// Piecewise-linear monotone function with flat extension outside its grid.
class MonotoneGrid {
 public:
  MonotoneGrid() = default;
  MonotoneGrid(std::vector<double> x, std::vector<double> y, Direction dir);
  static MonotoneGrid sample(const std::function<double(double)>& f, const std::vector<double>& x, Direction dir);

  double operator()(double x) const;
  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }
  Direction direction() const { return dir_; }
  double front() const { return y_.front(); }
  double back() const { return y_.back(); }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  Direction dir_ = Direction::Increasing;
};

struct DensityExpectation {
  double value = 0.0;            // g(left) + int phi(G) dg
  double stieltjes = 0.0;        // int g rho phi'(G) dx
  double agreement_bound = 0.0;  // allowed |value - stieltjes|
  double richardson = 0.0;       // (value - half-grid value) / 3
};

// The survival curve is extended as 1 to the left of its grid and 0 to the right.
DensityExpectation choquet_expectation_density(const MonotoneGrid& survival, const MonotoneGrid& g,
                                               const DistortionSpec& d, double t);

struct MonotonicityReport {
  std::size_t checks = 0;
  std::size_t failures = 0;
  double max_error = 0.0;
  bool pass() const { return failures == 0; }
};

// Dominated pair: outcome-wise lower <= upper on a shared probability vector.
struct DominatedPair {
  std::vector<double> probs;
  std::vector<double> lower;
  std::vector<double> upper;
};

struct ScaledCase {
  double c;
  DiscreteRV rv;
};

MonotonicityReport monotonicity_suite(const DistortionSpec& d, double t, const std::vector<double>& constants,
                                      const std::vector<ScaledCase>& scalings,
                                      const std::vector<DominatedPair>& pairs, double tol = 1e-12);

}  // namespace distort
