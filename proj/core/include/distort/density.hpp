#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "distort/distortion.hpp"

namespace distort {

using ScalarField = std::function<double(double t, double x)>;

// dX = b(t,X) dt + sigma(t,X) dB, X_0 = x0 on [0, T].
struct DiffusionSpec {
  ScalarField drift;
  ScalarField sigma;
  double x0 = 0.0;
  double T = 1.0;

  // Optional structure used by closed forms and faster estimators.
  std::optional<double> constant_drift;
  std::optional<double> constant_sigma;
  std::optional<double> ou_rate;  // b = -rate * x
  ScalarField drift_antiderivative;     // int_0^x b(t,y) dy
  ScalarField drift_antiderivative_dt;  // time derivative of the above
  ScalarField drift_dx;
  ScalarField sigma_dx;
  std::string label;

  static DiffusionSpec brownian(double x0 = 0.0, double T = 1.0);
  static DiffusionSpec constant(double b, double x0 = 0.0, double T = 1.0);
  static DiffusionSpec ornstein_uhlenbeck(double rate, double x0 = 0.0, double T = 1.0);
  // b = amplitude * tanh(x / scale)
  static DiffusionSpec tanh_drift(double amplitude, double scale, double x0 = 0.0, double T = 1.0);
  // replaces sigma with base + amplitude * tanh(x)
  DiffusionSpec with_tanh_sigma(double base, double amplitude) const;
  DiffusionSpec with_constant_sigma(double s) const;

  double b(double t, double x) const { return drift(t, x); }
  double s(double t, double x) const { return sigma(t, x); }
  double b_x(double t, double x) const;
  double s_x(double t, double x) const;
  bool unit_sigma() const { return constant_sigma && *constant_sigma == 1.0; }
  // Gaussian transition law available in closed form
  bool gaussian() const { return (constant_drift || ou_rate) && constant_sigma; }
};

// Anything that can report rho(t,x) and G(t,x) = P(X_t >= x).
class DensityModel {
 public:
  virtual ~DensityModel() = default;
  virtual double rho(double t, double x) const = 0;
  virtual Prob survival(double t, double x) const = 0;
  // x-interval where rho and the survival pair are numerically meaningful
  virtual std::pair<double, double> reliable_range(double t) const = 0;
  virtual double rho_x(double t, double x) const;
};

// Gaussian marginals: constant drift/sigma, or Ornstein-Uhlenbeck.
class GaussianDensity : public DensityModel {
 public:
  explicit GaussianDensity(const DiffusionSpec& spec);
  double mean(double t) const;
  double variance(double t) const;
  double rho(double t, double x) const override;
  Prob survival(double t, double x) const override;
  std::pair<double, double> reliable_range(double t) const override;
  double rho_x(double t, double x) const override;

  static constexpr double kReliableTail = 1e-250;

 private:
  double x0_, drift_ = 0.0, sigma_ = 1.0, rate_ = 0.0;
  bool ou_ = false;
};

struct FieldDiagnostics {
  double projection = 0.0;       // largest correction applied by monotone projection
  double boundary_leak = 0.0;    // mass within one cell of the domain edges
  double mass_error = 0.0;       // max |int rho dx - 1| over slices
  std::size_t untrusted = 0;
};

// rho and G on a rectangular grid; row-major by time.
class DensityField : public DensityModel {
 public:
  DensityField(std::vector<double> t_grid, std::vector<double> x_grid, std::vector<double> rho, std::vector<Prob> G,
               double reliable_tail);

  const std::vector<double>& t_grid() const { return t_; }
  const std::vector<double>& x_grid() const { return x_; }
  std::size_t nt() const { return t_.size(); }
  std::size_t nx() const { return x_.size(); }
  double rho_at(std::size_t it, std::size_t ix) const { return rho_[it * x_.size() + ix]; }
  Prob G_at(std::size_t it, std::size_t ix) const { return G_[it * x_.size() + ix]; }
  const std::vector<double>& rho_values() const { return rho_; }
  const std::vector<Prob>& G_values() const { return G_; }
  double reliable_tail() const { return tail_; }
  bool trusted(std::size_t it, std::size_t ix) const;

  double rho(double t, double x) const override;
  Prob survival(double t, double x) const override;
  std::pair<double, double> reliable_range(double t) const override;

  // Monte Carlo standard errors when produced by the bridge estimator.
  std::vector<double> rho_se, G_se;
  FieldDiagnostics diagnostics;
  std::string method;

 private:
  std::pair<std::size_t, std::size_t> locate(double t, double x, double& wt, double& wx) const;
  std::vector<double> t_, x_;
  std::vector<double> rho_;
  std::vector<Prob> G_;
  double tail_;
  std::vector<std::pair<double, double>> range_;
};

DensityField gaussian_field(const DiffusionSpec& spec, const std::vector<double>& t_grid,
                            const std::vector<double>& x_grid);
// Brownian case with only x0 given.
DensityField gaussian_field(double x0, const std::vector<double>& t_grid, const std::vector<double>& x_grid);

struct SurvivalPdeOptions {
  std::size_t steps = 800;
  int rannacher = 2;
  double max_leak = 1e-3;
};

// Forward survival equation G_t = 1/2 G_xx - b G_x on a uniform x grid,
// started at t_grid.front() from the Gaussian kernel.
DensityField solve_survival_pde(const DiffusionSpec& spec, const std::vector<double>& t_grid,
                                const std::vector<double>& x_grid, const SurvivalPdeOptions& opt = {});

// Same scheme started at time s from a regularized point mass at x.
// Returns G(t, y) over y_grid.
std::vector<Prob> conditional_survival_pde(const DiffusionSpec& spec, double s, double x, double t,
                                           const std::vector<double>& y_grid, double delta_reg = 1e-4,
                                           std::size_t steps = 800);

struct BridgeEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  bool integrated_form = false;
};

struct BridgeOptions {
  std::size_t paths = 100000;
  std::size_t steps = 64;
  std::uint64_t seed = 1;
  std::size_t batches = 50;
  unsigned threads = 1;
  std::uint32_t stream = 0;  // separates independent estimates sharing a seed
  bool allow_integrated = true;
};

BridgeEstimate bridge_density_mc(const DiffusionSpec& spec, double t, double x, const BridgeOptions& opt);

struct BridgeSurvival {
  BridgeEstimate G, S;  // P(X_t >= x), P(X_t < x)
};
BridgeSurvival bridge_survival_mc(const DiffusionSpec& spec, double t, double x, const BridgeOptions& opt);

DensityField bridge_field(const DiffusionSpec& spec, const std::vector<double>& t_grid,
                          const std::vector<double>& x_grid, const BridgeOptions& opt);

// Sample variance of the bridge martingale at time r/(1+r) for t = 1; should equal r.
BridgeEstimate bridge_martingale_variance(double r, const BridgeOptions& opt);

struct TailDiagnostics {
  double max_log_slope = 0.0;       // max |rho_x| / rho
  double min_ratio_factor = 0.0;    // min G(1-G)/rho * (1+|x|)
  double max_ratio = 0.0;           // max G(1-G)/rho
  double implied_bound = 0.0;       // smallest C0 consistent with the grid
  std::size_t cells = 0;
};

TailDiagnostics tail_ratio_diagnostics(const DensityField& field, double t0);

}  // namespace distort
