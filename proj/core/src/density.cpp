#include "distort/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "distort/error.hpp"
#include "distort/normal.hpp"
#include "distort/parallel.hpp"
#include "distort/pde.hpp"
#include "distort/philox.hpp"

namespace distort {

namespace {

constexpr double kPdeReliableTail = 1e-8;

double central_dx(const ScalarField& f, double t, double x) {
  const double h = 1e-5 * std::max(1.0, std::abs(x));
  return (f(t, x + h) - f(t, x - h)) / (2.0 * h);
}

// log cosh without overflow
double log_cosh(double y) {
  const double a = std::abs(y);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

std::string at(double t, double x) { return "(t=" + std::to_string(t) + ", x=" + std::to_string(x) + ")"; }

void require_unit_sigma(const DiffusionSpec& spec, const std::vector<double>& t_grid, const std::vector<double>& x_grid) {
  if (spec.unit_sigma()) return;
  for (double t : {t_grid.front(), t_grid.back()}) {
    for (double x : {x_grid.front(), x_grid[x_grid.size() / 2], x_grid.back()}) {
      if (std::abs(spec.s(t, x) - 1.0) > 1e-12) throw DomainError("this solver needs sigma == 1; apply the Lamperti transform first");
    }
  }
}

// Clamp to [0,1] and enforce monotonicity in x; returns the largest change.
double project_slice(std::span<Prob> G) {
  double worst = 0.0;
  double run_p = 1.0, run_c = 0.0;
  for (auto& g : G) {
    const double p = std::min(std::clamp(g.p, 0.0, 1.0), run_p);
    const double c = std::max(std::clamp(g.comp, 0.0, 1.0), run_c);
    worst = std::max({worst, std::abs(p - g.p), std::abs(c - g.comp)});
    g = {p, c};
    run_p = p;
    run_c = c;
  }
  return worst;
}

// rho = -dG/dx from whichever of G, 1-G is smaller at the node.
void density_from_survival(std::span<const Prob> G, const std::vector<double>& x, std::span<double> rho) {
  const std::size_t n = x.size();
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t l = j == 0 ? 0 : j - 1;
    const std::size_t r = j + 1 == n ? j : j + 1;
    const double d = G[j].p < 0.5 ? G[l].p - G[r].p : G[r].comp - G[l].comp;
    rho[j] = std::max(0.0, d / (x[r] - x[l]));
  }
}

double trapezoid(std::span<const double> y, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t j = 1; j < x.size(); ++j) s += 0.5 * (y[j] + y[j - 1]) * (x[j] - x[j - 1]);
  return s;
}

struct PathExponent {
  const DiffusionSpec& spec;
  bool integrated;

  double integrand(double s, double y) const {
    const double dtb = spec.drift_antiderivative_dt ? spec.drift_antiderivative_dt(s, y) : 0.0;
    const double b = spec.b(s, y);
    return dtb + 0.5 * spec.b_x(s, y) + 0.5 * b * b;
  }

  // Exponent along a bridge from (0, x0) to (t, end), exact conditional steps.
  double operator()(PathRng& rng, double t, double end, std::size_t steps) const {
    const double h = t / static_cast<double>(steps);
    double X = spec.x0;
    double acc = 0.0;
    double f_prev = integrated ? integrand(0.0, X) : 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const double s = h * static_cast<double>(k);
      const double s_next = k + 1 == steps ? t : s + h;
      double X_next = end;
      if (k + 1 < steps) {
        const double rem = t - s;
        const double mean = X + (end - X) * h / rem;
        const double var = h * (t - s_next) / rem;
        X_next = mean + std::sqrt(var) * rng.normal();
      }
      if (integrated) {
        const double f_next = integrand(s_next, X_next);
        acc += 0.5 * (f_prev + f_next) * h;
        f_prev = f_next;
      } else {
        const double b = spec.b(s, X);
        acc += b * (X_next - X) - 0.5 * b * b * h;
      }
      X = X_next;
    }
    if (integrated) return spec.drift_antiderivative(t, end) - spec.drift_antiderivative(0.0, spec.x0) - acc;
    return acc;
  }
};

bool zero_drift(const DiffusionSpec& spec) { return spec.constant_drift && *spec.constant_drift == 0.0; }

// Averages weight(rng, path) over paths; batch-means standard error.
template <class Weight>
BridgeEstimate average_paths(const BridgeOptions& opt, std::uint32_t tag, Weight&& weight) {
  if (opt.paths == 0 || opt.batches == 0) throw DomainError("Monte Carlo needs paths > 0 and batches > 0");
  const std::size_t B = std::min(opt.batches, opt.paths);
  std::vector<double> sums(B, 0.0);
  std::vector<std::size_t> counts(B, 0);
  parallel_for(B, opt.threads, [&](std::size_t b) {
    const std::size_t lo = opt.paths * b / B, hi = opt.paths * (b + 1) / B;
    double s = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
      PathRng rng(opt.seed, p, tag);
      s += weight(rng, p);
    }
    sums[b] = s;
    counts[b] = hi - lo;
  });
  std::vector<double> means(B);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    total += sums[b];
    means[b] = sums[b] / static_cast<double>(counts[b]);
  }
  BridgeEstimate e;
  e.value = total / static_cast<double>(opt.paths);
  e.std_error = batch_stats(means).std_error;
  e.paths = opt.paths;
  e.seed = opt.seed;
  return e;
}

double checked_exp(double e, double t, double x) {
  const double w = std::exp(e);
  if (!std::isfinite(w)) {
    throw NumericError("bridge exponent not finite at " + at(t, x) + " (exponent " + std::to_string(e) +
                       "); the drift may be unbounded on the path range");
  }
  return w;
}

}  // namespace

// ---------------- DiffusionSpec ----------------

DiffusionSpec DiffusionSpec::brownian(double x0, double T) {
  DiffusionSpec s = constant(0.0, x0, T);
  s.label = "brownian";
  return s;
}

DiffusionSpec DiffusionSpec::constant(double b, double x0, double T) {
  if (!std::isfinite(b)) throw DomainError("drift must be finite");
  if (!(T > 0.0)) throw DomainError("horizon T must be positive");
  DiffusionSpec s;
  s.drift = [b](double, double) { return b; };
  s.sigma = [](double, double) { return 1.0; };
  s.x0 = x0;
  s.T = T;
  s.constant_drift = b;
  s.constant_sigma = 1.0;
  s.drift_antiderivative = [b](double, double x) { return b * x; };
  s.drift_antiderivative_dt = [](double, double) { return 0.0; };
  s.drift_dx = [](double, double) { return 0.0; };
  s.sigma_dx = [](double, double) { return 0.0; };
  s.label = "constant";
  return s;
}

DiffusionSpec DiffusionSpec::ornstein_uhlenbeck(double rate, double x0, double T) {
  if (!(rate > 0.0)) throw DomainError("Ornstein-Uhlenbeck rate must be positive");
  DiffusionSpec s = constant(0.0, x0, T);
  s.constant_drift.reset();
  s.ou_rate = rate;
  s.drift = [rate](double, double x) { return -rate * x; };
  s.drift_antiderivative = [rate](double, double x) { return -0.5 * rate * x * x; };
  s.drift_dx = [rate](double, double) { return -rate; };
  s.label = "ornstein_uhlenbeck";
  return s;
}

DiffusionSpec DiffusionSpec::tanh_drift(double amplitude, double scale, double x0, double T) {
  if (!(scale > 0.0)) throw DomainError("tanh drift scale must be positive");
  DiffusionSpec s = constant(0.0, x0, T);
  s.constant_drift.reset();
  s.drift = [amplitude, scale](double, double x) { return amplitude * std::tanh(x / scale); };
  s.drift_antiderivative = [amplitude, scale](double, double x) { return amplitude * scale * log_cosh(x / scale); };
  s.drift_dx = [amplitude, scale](double, double x) {
    const double c = std::cosh(x / scale);
    return amplitude / (scale * c * c);
  };
  s.label = "tanh";
  return s;
}

DiffusionSpec DiffusionSpec::with_tanh_sigma(double base, double amplitude) const {
  if (!(base - std::abs(amplitude) > 0.0)) throw DomainError("sigma = base + amplitude tanh(x) must stay positive");
  DiffusionSpec s(*this);
  s.constant_sigma.reset();
  s.sigma = [base, amplitude](double, double x) { return base + amplitude * std::tanh(x); };
  s.sigma_dx = [amplitude](double, double x) {
    const double c = std::cosh(x);
    return amplitude / (c * c);
  };
  return s;
}

DiffusionSpec DiffusionSpec::with_constant_sigma(double v) const {
  if (!(v > 0.0)) throw DomainError("sigma must be positive");
  DiffusionSpec s(*this);
  s.constant_sigma = v;
  s.sigma = [v](double, double) { return v; };
  s.sigma_dx = [](double, double) { return 0.0; };
  return s;
}

double DiffusionSpec::b_x(double t, double x) const { return drift_dx ? drift_dx(t, x) : central_dx(drift, t, x); }
double DiffusionSpec::s_x(double t, double x) const { return sigma_dx ? sigma_dx(t, x) : central_dx(sigma, t, x); }

// ---------------- density models ----------------

double DensityModel::rho_x(double t, double x) const {
  const double h = 1e-5 * std::max(1.0, std::abs(x));
  return (rho(t, x + h) - rho(t, x - h)) / (2.0 * h);
}

GaussianDensity::GaussianDensity(const DiffusionSpec& spec) : x0_(spec.x0) {
  if (!spec.gaussian()) throw DomainError("closed-form density needs constant sigma and constant or OU drift");
  sigma_ = *spec.constant_sigma;
  if (spec.ou_rate) {
    ou_ = true;
    rate_ = *spec.ou_rate;
  } else {
    drift_ = *spec.constant_drift;
  }
}

double GaussianDensity::mean(double t) const { return ou_ ? x0_ * std::exp(-rate_ * t) : x0_ + drift_ * t; }

double GaussianDensity::variance(double t) const {
  return ou_ ? sigma_ * sigma_ * -std::expm1(-2.0 * rate_ * t) / (2.0 * rate_) : sigma_ * sigma_ * t;
}

double GaussianDensity::rho(double t, double x) const {
  if (!(t > 0.0)) throw DomainError("density needs t > 0");
  const double sd = std::sqrt(variance(t));
  return normal::pdf((x - mean(t)) / sd) / sd;
}

Prob GaussianDensity::survival(double t, double x) const {
  if (!(t > 0.0)) throw DomainError("survival needs t > 0");
  const double z = (x - mean(t)) / std::sqrt(variance(t));
  return {normal::sf(z), normal::cdf(z)};
}

std::pair<double, double> GaussianDensity::reliable_range(double t) const {
  static const double z = normal::quantile_upper(kReliableTail);
  const double sd = std::sqrt(variance(t));
  return {mean(t) - z * sd, mean(t) + z * sd};
}

double GaussianDensity::rho_x(double t, double x) const {
  const double v = variance(t);
  return -(x - mean(t)) / v * rho(t, x);
}

DensityField::DensityField(std::vector<double> t_grid, std::vector<double> x_grid, std::vector<double> rho,
                           std::vector<Prob> G, double reliable_tail)
    : t_(std::move(t_grid)), x_(std::move(x_grid)), rho_(std::move(rho)), G_(std::move(G)), tail_(reliable_tail) {
  if (t_.empty() || x_.size() < 2) throw DomainError("density field needs a time slice and two states");
  if (rho_.size() != t_.size() * x_.size() || G_.size() != rho_.size()) throw DomainError("density field size mismatch");
  for (std::size_t i = 0; i < t_.size(); ++i) {
    if (!(t_[i] > 0.0) || (i > 0 && !(t_[i] > t_[i - 1]))) throw DomainError("field times must be positive and increasing");
  }
  for (std::size_t j = 1; j < x_.size(); ++j) {
    if (!(x_[j] > x_[j - 1])) throw DomainError("field states must be increasing");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  range_.assign(t_.size(), {nan, nan});
  for (std::size_t it = 0; it < t_.size(); ++it) {
    std::size_t lo = x_.size(), hi = 0;
    for (std::size_t ix = 0; ix < x_.size(); ++ix) {
      if (!trusted(it, ix)) continue;
      lo = std::min(lo, ix);
      hi = ix;
    }
    if (lo <= hi && lo < x_.size()) range_[it] = {x_[lo], x_[hi]};
  }
}

bool DensityField::trusted(std::size_t it, std::size_t ix) const {
  const Prob g = G_at(it, ix);
  return g.p >= tail_ && g.comp >= tail_ && rho_at(it, ix) > 0.0;
}

std::pair<std::size_t, std::size_t> DensityField::locate(double t, double x, double& wt, double& wx) const {
  auto bracket = [](const std::vector<double>& g, double v, double& w) -> std::size_t {
    if (g.size() == 1 || v <= g.front()) {
      w = 0.0;
      return 0;
    }
    if (v >= g.back()) {
      w = 1.0;
      return g.size() - 2;
    }
    const std::size_t i = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), v) - g.begin()) - 1;
    w = (v - g[i]) / (g[i + 1] - g[i]);
    return i;
  };
  const std::size_t it = bracket(t_, t, wt);
  const std::size_t ix = bracket(x_, x, wx);
  return {it, ix};
}

double DensityField::rho(double t, double x) const {
  double wt, wx;
  const auto [it, ix] = locate(t, x, wt, wx);
  auto slice = [&](std::size_t i) { return (1.0 - wx) * rho_at(i, ix) + wx * rho_at(i, ix + 1); };
  if (t_.size() == 1) return slice(0);
  return (1.0 - wt) * slice(it) + wt * slice(it + 1);
}

Prob DensityField::survival(double t, double x) const {
  double wt, wx;
  const auto [it, ix] = locate(t, x, wt, wx);
  auto slice = [&](std::size_t i) {
    const Prob a = G_at(i, ix), b = G_at(i, ix + 1);
    return Prob{(1.0 - wx) * a.p + wx * b.p, (1.0 - wx) * a.comp + wx * b.comp};
  };
  if (t_.size() == 1) return slice(0);
  const Prob a = slice(it), b = slice(it + 1);
  return {(1.0 - wt) * a.p + wt * b.p, (1.0 - wt) * a.comp + wt * b.comp};
}

std::pair<double, double> DensityField::reliable_range(double t) const {
  if (t_.size() == 1 || t <= t_.front()) return range_.front();
  if (t >= t_.back()) return range_.back();
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), t) - t_.begin()) - 1;
  if (t == t_[i]) return range_[i];
  return {std::max(range_[i].first, range_[i + 1].first), std::min(range_[i].second, range_[i + 1].second)};
}

// ---------------- constructors of fields ----------------

DensityField gaussian_field(const DiffusionSpec& spec, const std::vector<double>& t_grid,
                            const std::vector<double>& x_grid) {
  for (double t : t_grid) {
    if (!(t > 0.0)) throw DomainError("closed-form field needs t > 0, got " + std::to_string(t));
  }
  const GaussianDensity g(spec);
  std::vector<double> rho;
  std::vector<Prob> G;
  rho.reserve(t_grid.size() * x_grid.size());
  G.reserve(rho.capacity());
  for (double t : t_grid) {
    for (double x : x_grid) {
      rho.push_back(g.rho(t, x));
      G.push_back(g.survival(t, x));
    }
  }
  DensityField f(t_grid, x_grid, std::move(rho), std::move(G), GaussianDensity::kReliableTail);
  f.method = "closed_form";
  return f;
}

DensityField gaussian_field(double x0, const std::vector<double>& t_grid, const std::vector<double>& x_grid) {
  return gaussian_field(DiffusionSpec::brownian(x0, t_grid.empty() ? 1.0 : std::max(1.0, t_grid.back())), t_grid, x_grid);
}

namespace {

// G and 1-G as two columns of the same forward problem, initial data at s.
void forward_survival(const DiffusionSpec& spec, const std::vector<double>& y, double s, double center, double var,
                      double drift_shift, const std::vector<double>& outputs, std::size_t steps,
                      const std::function<void(std::size_t, std::span<const double>)>& record, int rannacher) {
  const std::size_t n = y.size();
  std::vector<double> W(2 * n);
  const double sd = std::sqrt(var);
  for (std::size_t j = 0; j < n; ++j) {
    const double z = (y[j] - center - drift_shift) / sd;
    W[2 * j] = normal::sf(z);
    W[2 * j + 1] = normal::cdf(z);
  }
  ParabolicStepper stepper(y, 1.0, Boundary::Dirichlet, Boundary::Dirichlet, 2, {1.0, 0.0}, {0.0, 1.0});
  const auto nodes = time_nodes(s, outputs.back(), steps, Grading::Uniform, outputs);
  std::size_t next_out = 0;
  while (next_out < outputs.size() && outputs[next_out] <= s) record(next_out++, W);
  stepper.integrate(
      W, nodes, rannacher,
      [&](double t, std::span<double> v) {
        for (std::size_t j = 0; j < n; ++j) v[j] = -spec.b(t, y[j]);
      },
      [&](std::size_t k) {
        while (next_out < outputs.size() && std::abs(nodes[k] - outputs[next_out]) <= 1e-12 * std::max(1.0, nodes[k])) {
          record(next_out++, W);
        }
      });
  if (next_out != outputs.size()) throw NumericError("survival solver missed an output time");
}

}  // namespace

DensityField solve_survival_pde(const DiffusionSpec& spec, const std::vector<double>& t_grid,
                                const std::vector<double>& x_grid, const SurvivalPdeOptions& opt) {
  if (t_grid.empty()) throw DomainError("survival solver needs output times");
  const double t_init = t_grid.front();
  if (!(t_init >= 1e-3)) throw DomainError("survival solver starts at t_init >= 1e-3; got " + std::to_string(t_init));
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("output times must increase");
  }
  require_unit_sigma(spec, t_grid, x_grid);
  const std::size_t nt = t_grid.size(), nx = x_grid.size();
  std::vector<Prob> G(nt * nx);
  std::vector<double> rho(nt * nx);
  FieldDiagnostics diag;

  auto record = [&](std::size_t it, std::span<const double> W) {
    std::span<Prob> slice(G.data() + it * nx, nx);
    for (std::size_t j = 0; j < nx; ++j) slice[j] = {W[2 * j], W[2 * j + 1]};
    diag.projection = std::max(diag.projection, project_slice(slice));
    std::span<double> r(rho.data() + it * nx, nx);
    density_from_survival(slice, x_grid, r);
    diag.boundary_leak = std::max(diag.boundary_leak, slice[1].comp + slice[nx - 2].p);
    diag.mass_error = std::max(diag.mass_error, std::abs(trapezoid(r, x_grid) - 1.0));
  };
  if (nt == 1) {
    // only the initial slice
    std::vector<double> W(2 * nx);
    for (std::size_t j = 0; j < nx; ++j) {
      const double z = (x_grid[j] - spec.x0 - spec.b(0.0, spec.x0) * t_init) / std::sqrt(t_init);
      W[2 * j] = normal::sf(z);
      W[2 * j + 1] = normal::cdf(z);
    }
    record(0, W);
  } else {
    forward_survival(spec, x_grid, t_init, spec.x0, t_init, spec.b(0.0, spec.x0) * t_init, t_grid, opt.steps, record,
                     opt.rannacher);
  }
  if (diag.boundary_leak > opt.max_leak) {
    throw NumericError("survival solver leaks " + std::to_string(diag.boundary_leak) +
                       " of mass at the domain edges; widen the x grid");
  }
  DensityField f(t_grid, x_grid, std::move(rho), std::move(G), kPdeReliableTail);
  f.diagnostics = diag;
  f.method = "pde";
  return f;
}

std::vector<Prob> conditional_survival_pde(const DiffusionSpec& spec, double s, double x, double t,
                                           const std::vector<double>& y_grid, double delta_reg, std::size_t steps) {
  if (!(t > s && s >= 0.0)) throw DomainError("conditional survival needs 0 <= s < t");
  if (!(delta_reg > 0.0)) throw DomainError("regularization variance must be positive");
  require_unit_sigma(spec, {s, t}, y_grid);
  std::vector<Prob> out(y_grid.size());
  forward_survival(spec, y_grid, s, x, delta_reg, 0.0, {t}, steps,
                   [&](std::size_t, std::span<const double> W) {
                     for (std::size_t j = 0; j < y_grid.size(); ++j) out[j] = {W[2 * j], W[2 * j + 1]};
                   },
                   2);
  project_slice(out);
  return out;
}

// ---------------- Brownian bridge estimators ----------------

BridgeEstimate bridge_density_mc(const DiffusionSpec& spec, double t, double x, const BridgeOptions& opt) {
  if (!(t > 0.0 && t <= spec.T * (1.0 + 1e-12))) throw DomainError("bridge density needs t in (0, T]");
  if (opt.steps == 0) throw DomainError("bridge needs at least one step");
  const bool integrated = opt.allow_integrated && static_cast<bool>(spec.drift_antiderivative);
  const double kernel = normal::pdf((x - spec.x0) / std::sqrt(t)) / std::sqrt(t);
  BridgeEstimate e;
  if (zero_drift(spec)) {
    e.value = kernel;
    e.paths = opt.paths;
    e.seed = opt.seed;
  } else {
    const PathExponent expo{spec, integrated};
    e = average_paths(opt, opt.stream * 4u, [&](PathRng& rng, std::size_t) {
      return checked_exp(expo(rng, t, x, opt.steps), t, x);
    });
    e.value *= kernel;
    e.std_error *= kernel;
  }
  e.integrated_form = integrated;
  return e;
}

BridgeSurvival bridge_survival_mc(const DiffusionSpec& spec, double t, double x, const BridgeOptions& opt) {
  if (!(t > 0.0 && t <= spec.T * (1.0 + 1e-12))) throw DomainError("bridge survival needs t in (0, T]");
  const bool integrated = opt.allow_integrated && static_cast<bool>(spec.drift_antiderivative);
  const double sd = std::sqrt(t);
  const double z = (x - spec.x0) / sd;
  const double upper = normal::sf(z), lower = normal::cdf(z);
  BridgeSurvival out;
  if (zero_drift(spec)) {
    out.G = {upper, 0.0, opt.paths, opt.seed, integrated};
    out.S = {lower, 0.0, opt.paths, opt.seed, integrated};
    return out;
  }
  const PathExponent expo{spec, integrated};
  // endpoint drawn from the driftless law truncated to one side of x
  auto run = [&](bool above, std::uint32_t tag) {
    const double mass = above ? upper : lower;
    if (mass == 0.0) return BridgeEstimate{0.0, 0.0, opt.paths, opt.seed, integrated};
    BridgeEstimate e = average_paths(opt, tag, [&](PathRng& rng, std::size_t) {
      const double v = rng.uniform() * mass;
      const double end = spec.x0 + sd * (above ? normal::quantile_upper(v) : normal::quantile(v));
      return checked_exp(expo(rng, t, end, opt.steps), t, end);
    });
    e.value *= mass;
    e.std_error *= mass;
    e.integrated_form = integrated;
    return e;
  };
  out.G = run(true, opt.stream * 4u + 1u);
  out.S = run(false, opt.stream * 4u + 2u);
  return out;
}

DensityField bridge_field(const DiffusionSpec& spec, const std::vector<double>& t_grid,
                          const std::vector<double>& x_grid, const BridgeOptions& opt) {
  const std::size_t nt = t_grid.size(), nx = x_grid.size();
  std::vector<double> rho(nt * nx), rho_se(nt * nx), G_se(nt * nx);
  std::vector<Prob> G(nt * nx);
  for (std::size_t it = 0; it < nt; ++it) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const std::size_t k = it * nx + ix;
      BridgeOptions o = opt;
      o.stream = opt.stream + static_cast<std::uint32_t>(k);
      const auto d = bridge_density_mc(spec, t_grid[it], x_grid[ix], o);
      const auto s = bridge_survival_mc(spec, t_grid[it], x_grid[ix], o);
      rho[k] = d.value;
      rho_se[k] = d.std_error;
      G[k] = {s.G.value, s.S.value};
      G_se[k] = std::max(s.G.std_error, s.S.std_error);
    }
  }
  DensityField f(t_grid, x_grid, std::move(rho), std::move(G), GaussianDensity::kReliableTail);
  f.rho_se = std::move(rho_se);
  f.G_se = std::move(G_se);
  f.method = "bridge";
  return f;
}

BridgeEstimate bridge_martingale_variance(double r, const BridgeOptions& opt) {
  if (!(r > 0.0)) throw DomainError("time-change argument must be positive");
  const double s_star = r / (1.0 + r);
  const std::size_t steps = std::max<std::size_t>(opt.steps, 2);
  // bridge from (0,0) to (1,0) on a grid containing s_star
  return average_paths(opt, opt.stream * 4u + 3u, [&](PathRng& rng, std::size_t) {
    double X = 0.0, s = 0.0;
    const double h = s_star / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
      const double s_next = k + 1 == steps ? s_star : s + h;
      const double rem = 1.0 - s;
      X = X + (0.0 - X) * (s_next - s) / rem + std::sqrt((s_next - s) * (1.0 - s_next) / rem) * rng.normal();
      s = s_next;
    }
    const double M = X / (1.0 - s_star);
    return M * M;
  });
}

TailDiagnostics tail_ratio_diagnostics(const DensityField& field, double t0) {
  TailDiagnostics d;
  d.min_ratio_factor = std::numeric_limits<double>::infinity();
  const auto& t = field.t_grid();
  const auto& x = field.x_grid();
  if (t0 > t.back()) throw DomainError("t0 beyond the field's last time");
  for (std::size_t it = 0; it < t.size(); ++it) {
    if (t[it] < t0) continue;
    for (std::size_t ix = 0; ix < x.size(); ++ix) {
      if (!field.trusted(it, ix)) continue;
      const double r = field.rho_at(it, ix);
      if (ix > 0 && ix + 1 < x.size() && field.trusted(it, ix - 1) && field.trusted(it, ix + 1)) {
        const double slope =
            (std::log(field.rho_at(it, ix + 1)) - std::log(field.rho_at(it, ix - 1))) / (x[ix + 1] - x[ix - 1]);
        d.max_log_slope = std::max(d.max_log_slope, std::abs(slope));
      }
      const Prob g = field.G_at(it, ix);
      const double ratio = g.p * g.comp / r;
      d.max_ratio = std::max(d.max_ratio, ratio);
      d.min_ratio_factor = std::min(d.min_ratio_factor, ratio * (1.0 + std::abs(x[ix])));
      ++d.cells;
    }
  }
  if (d.cells == 0) d.min_ratio_factor = 0.0;
  d.implied_bound = std::max({d.max_log_slope, d.max_ratio, d.min_ratio_factor > 0 ? 1.0 / d.min_ratio_factor : 0.0});
  return d;
}

}  // namespace distort
