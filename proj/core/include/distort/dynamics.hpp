#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distort/choquet.hpp"
#include "distort/density.hpp"
#include "distort/distortion.hpp"
#include "distort/pde.hpp"
#include "distort/tree.hpp"

namespace distort {

using DriftFn = std::function<double(double t, double x)>;

// mu on a rectangular grid, row-major by time.
struct DriftField {
  std::vector<double> t_grid, x_grid;
  std::vector<double> mu;
  std::string provenance;
  std::size_t untrusted = 0;  // grid cells filled by extension

  double at(std::size_t it, std::size_t ix) const { return mu[it * x_grid.size() + ix]; }
  // Bilinear inside; linear in x with the edge slope beyond the x range, held
  // constant beyond the t range. Off-range x queries bump *extrapolated.
  double eval(double t, double x, std::size_t* extrapolated = nullptr) const;
  // smallest C with |mu| <= C (1 + |x|) on the grid
  double growth_constant() const;
  DriftFn as_function() const;
};

struct DriftOptions {
  double sigma = 1.0;
  // survival values closer than this to 0 or 1 are treated as tails
  double tail = 1e-100;
  double extension_step = 0.05;
};

// Pointwise mu = b + [phi_t - 1/2 phi_pp rho^2 sigma^2] / (phi_p rho) at p = G(t,x).
// Outside the model's reliable range the value is extended linearly from the edge.
class DistortedDrift {
 public:
  DistortedDrift(DistortionSpec d, const DensityModel& density, ScalarField b, DriftOptions opt = {});
  double operator()(double t, double x) const;
  // raw formula; nullopt where the inputs are not trustworthy
  std::optional<double> raw(double t, double x) const;

 private:
  DistortionSpec d_;
  const DensityModel* density_;
  ScalarField b_;
  DriftOptions opt_;
  std::uint64_t id_;
};

DriftField compute_mu(const DistortionSpec& d, const DensityField& field, const ScalarField& b, double sigma = 1.0);
DriftField compute_mu(const DistortionSpec& d, const DensityModel& density, const ScalarField& b,
                      const std::vector<double>& t_grid, const std::vector<double>& x_grid, double sigma = 1.0);

// mu-check for general sigma and sigma-check. With sigma_check == sigma the
// result is checked against compute_mu.
DriftField general_sigma_mu(const DistortionSpec& d, const DensityModel& density, const DiffusionSpec& spec,
                            const ScalarField& sigma_check, const ScalarField& sigma_check_dx,
                            const std::vector<double>& t_grid, const std::vector<double>& x_grid);

struct PdeGrid {
  double x_lo = std::numeric_limits<double>::quiet_NaN();  // default center - 8 sigma sqrt(t_end)
  double x_hi = std::numeric_limits<double>::quiet_NaN();
  double center = 0.0;
  std::size_t nx = 1601;
  std::size_t steps = 800;
  Grading grading = Grading::Sqrt;
  int rannacher = 2;
  double max_boundary_gradient = 1e-4;
  std::vector<double> include;  // extra s values to keep as nodes
};

struct PDESolution {
  std::vector<double> s_grid;  // increasing, last entry t_end
  std::vector<double> x_grid;
  std::vector<double> u;       // row-major by s
  MonotoneGrid terminal;
  double projection = 0.0;
  double boundary_gradient = 0.0;

  std::span<const double> slice(std::size_t is) const { return {u.data() + is * x_grid.size(), x_grid.size()}; }
  // index of the node equal to s (within 1e-12); throws if absent
  std::size_t index_of(double s) const;
  double eval(double s, double x) const;
  MonotoneGrid slice_grid(std::size_t is) const;
};

// Backward sweep of u_s + 1/2 sigma^2 u_xx + mu u_x = 0 from u(t_end) = g.
PDESolution solve_distorted_pde(const DriftFn& mu, const MonotoneGrid& g, double s_min, double t_end,
                                const PdeGrid& grid = {}, double sigma = 1.0);

// Several terminal functions at once; returns the slices at s_min,
// column-major (terminal c occupies [c*nx, (c+1)*nx)).
std::vector<double> solve_distorted_pde_multi(const DriftFn& mu, const std::vector<std::function<double(double)>>& g,
                                              double s_min, double t_end, const PdeGrid& grid,
                                              std::vector<double>& x_out, double sigma = 1.0);

struct QSimOptions {
  std::size_t paths = 100000;
  std::size_t steps = 250;
  std::uint64_t seed = 1;
  std::size_t batches = 50;
  unsigned threads = 1;
  std::uint32_t stream = 0;
  double sigma = 1.0;
  std::vector<double> y_grid;  // empirical survival abscissae
};

struct QSimResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> survival;     // fraction of paths with X_t >= y
  std::vector<double> survival_se;
  std::size_t extrapolated = 0;     // drift queries outside the field's x range
  std::size_t paths = 0;
  std::uint64_t seed = 0;
};

QSimResult simulate_q_dynamics(const DriftField& mu, const std::function<double(double)>& g, double s, double x,
                               double t, const QSimOptions& opt);
QSimResult simulate_q_dynamics(const DriftFn& mu, const std::function<double(double)>& g, double s, double x,
                               double t, const QSimOptions& opt);

struct PhiOptions {
  double s_min = std::numeric_limits<double>::quiet_NaN();  // default 1e-2 T
  PdeGrid grid{};
  bool monte_carlo = false;
  QSimOptions mc{};
  double delta_reg = 1e-4;
};

struct PhiCurve {
  double s = 0.0, t = 0.0, x = 0.0;
  std::string family;
  std::vector<double> p;     // includes 0 and 1
  std::vector<double> phi;
  std::vector<double> y;     // (G^{s,x}_t)^{-1}(p), NaN at the pinned ends
  std::string method;
  bool increasing = true;

  double operator()(double p) const;
};

PhiCurve build_phi_curve(const DistortionSpec& d, const DiffusionSpec& spec, const DensityModel& density, double s,
                         double t, double x, const std::vector<double>& p_grid, const PhiOptions& opt = {});

// smallest y on a decreasing curve with G(y) <= p, refined by bisection
double inverse_survival(const std::function<double(double)>& G, double p, double lo, double hi, double tol = 1e-12);

// logistic approximation of 1{x >= y}
inline double smoothed_indicator(double x, double y, double width) { return 1.0 / (1.0 + std::exp(-(x - y) / width)); }

struct LampertiTransform {
  DiffusionSpec original;
  DiffusionSpec transformed;  // unit sigma

  double psi(double t, double x) const;
  double psi_inv(double t, double xh) const;
  double psi_t(double t, double x) const;
  // rho(t,x) from the transformed density
  double rho_from_hat(const DensityModel& hat, double t, double x) const;
  Prob survival_from_hat(const DensityModel& hat, double t, double x) const;
};

struct LampertiOptions {
  double sigma_floor = 1e-6;
  double check_halfwidth = 10.0;
  std::size_t check_points = 401;
};

LampertiTransform lamperti_transform(const DiffusionSpec& spec, const LampertiOptions& opt = {});

// x_ij = x0 + (2j-i) sqrt(h), up = 1/2 + 1/2 b sqrt(h), h = T/N
TreeModel lattice_from_diffusion(const DiffusionSpec& spec, std::size_t N);

struct ConvergenceRow {
  std::size_t N = 0;
  double value = std::numeric_limits<double>::quiet_NaN();
  double error = std::numeric_limits<double>::quiet_NaN();
  double survival_error = std::numeric_limits<double>::quiet_NaN();  // sup_j |G^N - G| at t
  bool skipped = false;
  std::size_t mon2_violations = 0;
};

struct ConvergenceTable {
  double t = 0.0, x = 0.0;
  double reference = 0.0;
  std::string reference_method;
  std::vector<ConvergenceRow> rows;
  double order = std::numeric_limits<double>::quiet_NaN();  // -slope of log error vs log N
  bool monotone = false;
};

struct ConvergenceOptions {
  std::optional<double> reference;
  PdeGrid grid{};
};

ConvergenceTable convergence_study(const DiffusionSpec& spec, const DistortionSpec& d,
                                   const std::function<double(double)>& g, const std::vector<std::size_t>& N_list,
                                   double t, double x, const ConvergenceOptions& opt = {});

}  // namespace distort
