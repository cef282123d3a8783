#include "distort/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <atomic>
#include <string>

#include "distort/error.hpp"
#include "distort/normal.hpp"
#include "distort/parallel.hpp"
#include "distort/philox.hpp"

namespace distort {

namespace {

constexpr double kSingular = 1e-300;

std::string at(double t, double x) { return "(t=" + std::to_string(t) + ", x=" + std::to_string(x) + ")"; }

// Fills missing entries of one slice: linear interpolation inside, edge-slope
// extension outside. Returns how many were filled.
std::size_t extend_slice(std::span<double> v, std::span<const char> ok, const std::vector<double>& x, double t) {
  const std::size_t n = v.size();
  std::size_t first = n, last = 0, count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!ok[j]) continue;
    first = std::min(first, j);
    last = j;
    ++count;
  }
  if (count < 2) throw NumericError("drift has fewer than two trusted cells at t=" + std::to_string(t));
  std::size_t filled = 0;
  std::size_t prev = first;
  for (std::size_t j = first + 1; j <= last; ++j) {
    if (!ok[j]) continue;
    for (std::size_t k = prev + 1; k < j; ++k) {
      const double w = (x[k] - x[prev]) / (x[j] - x[prev]);
      v[k] = (1.0 - w) * v[prev] + w * v[j];
      ++filled;
    }
    prev = j;
  }
  auto neighbour = [&](std::size_t j, int dir) {
    for (std::size_t k = j;;) {
      k = dir > 0 ? k + 1 : k - 1;
      if (ok[k]) return k;
    }
  };
  const std::size_t f2 = neighbour(first, +1), l2 = neighbour(last, -1);
  const double sl = (v[f2] - v[first]) / (x[f2] - x[first]);
  const double sr = (v[last] - v[l2]) / (x[last] - x[l2]);
  for (std::size_t j = 0; j < first; ++j, ++filled) v[j] = v[first] + sl * (x[j] - x[first]);
  for (std::size_t j = last + 1; j < n; ++j, ++filled) v[j] = v[last] + sr * (x[j] - x[last]);
  return filled;
}

std::size_t bracket(const std::vector<double>& g, double v, double& w) {
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
}

double interp(const std::vector<double>& x, std::span<const double> y, double v) {
  double w;
  const std::size_t i = bracket(x, v, w);
  if (x.size() == 1) return y[0];
  return (1.0 - w) * y[i] + w * y[i + 1];
}

void check_grid(const std::vector<double>& t_grid, const std::vector<double>& x_grid) {
  if (t_grid.empty() || x_grid.size() < 2) throw DomainError("drift grid needs a time and two states");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > 0.0)) throw DomainError("drift grid needs t > 0 (the drift is singular at t = 0)");
    if (i > 0 && !(t_grid[i] > t_grid[i - 1])) throw DomainError("drift grid times must increase");
  }
  for (std::size_t j = 1; j < x_grid.size(); ++j) {
    if (!(x_grid[j] > x_grid[j - 1])) throw DomainError("drift grid states must increase");
  }
}

struct Edges {
  std::uint64_t owner = 0;
  double t = std::numeric_limits<double>::quiet_NaN();
  double lo = 0.0, hi = 0.0;
};

}  // namespace

// ---------------- DriftField ----------------

double DriftField::eval(double t, double x, std::size_t* extrapolated) const {
  const std::size_t nx = x_grid.size();
  auto row = [&](std::size_t it) {
    const double* m = mu.data() + it * nx;
    if (x < x_grid.front()) {
      if (extrapolated) ++*extrapolated;
      const double s = (m[1] - m[0]) / (x_grid[1] - x_grid[0]);
      return m[0] + s * (x - x_grid.front());
    }
    if (x > x_grid.back()) {
      if (extrapolated) ++*extrapolated;
      const double s = (m[nx - 1] - m[nx - 2]) / (x_grid[nx - 1] - x_grid[nx - 2]);
      return m[nx - 1] + s * (x - x_grid.back());
    }
    return interp(x_grid, std::span<const double>(m, nx), x);
  };
  if (t_grid.size() == 1) return row(0);
  double wt;
  const std::size_t it = bracket(t_grid, t, wt);
  return (1.0 - wt) * row(it) + wt * row(it + 1);
}

double DriftField::growth_constant() const {
  double c = 0.0;
  for (std::size_t it = 0; it < t_grid.size(); ++it) {
    for (std::size_t ix = 0; ix < x_grid.size(); ++ix) c = std::max(c, std::abs(at(it, ix)) / (1.0 + std::abs(x_grid[ix])));
  }
  return c;
}

DriftFn DriftField::as_function() const {
  auto self = std::make_shared<const DriftField>(*this);
  return [self](double t, double x) { return self->eval(t, x); };
}

// ---------------- pointwise drift ----------------

DistortedDrift::DistortedDrift(DistortionSpec d, const DensityModel& density, ScalarField b, DriftOptions opt)
    : d_(std::move(d)), density_(&density), b_(std::move(b)), opt_(opt) {
  static std::atomic<std::uint64_t> next{1};
  id_ = next.fetch_add(1);
  if (!b_) throw DomainError("drift function missing");
  if (!(opt_.sigma > 0.0)) throw DomainError("sigma must be positive");
}

std::optional<double> DistortedDrift::raw(double t, double x) const {
  if (!(t > 0.0)) throw DomainError("distorted drift is singular at t = 0");
  const auto [lo, hi] = density_->reliable_range(t);
  if (!(x >= lo && x <= hi)) return std::nullopt;
  const Prob G = density_->survival(t, x);
  if (!(G.smaller() >= opt_.tail)) return std::nullopt;
  const double rho = density_->rho(t, x);
  if (!(rho > 0.0) || !std::isfinite(rho)) return std::nullopt;
  const Derivatives D = d_.derivatives(t, G);
  if (!(D.dp * rho >= kSingular)) {
    throw NumericError("distorted drift singular at " + at(t, x) + ": phi_p * rho = " + std::to_string(D.dp * rho));
  }
  const double s2 = opt_.sigma * opt_.sigma;
  const double mu = b_(t, x) + D.dt / (D.dp * rho) - 0.5 * (D.dpp / D.dp) * rho * s2;
  if (!std::isfinite(mu)) throw NumericError("distorted drift not finite at " + at(t, x));
  return mu;
}

double DistortedDrift::operator()(double t, double x) const {
  if (auto v = raw(t, x)) return *v;
  // trusted interval at time t, found by bisection from the middle of the reliable range
  static thread_local Edges cache;
  if (cache.owner != id_ || cache.t != t) {
    const auto [lo, hi] = density_->reliable_range(t);
    const double c = 0.5 * (lo + hi);
    if (!raw(t, c)) throw NumericError("no trusted density cells at t=" + std::to_string(t));
    auto edge = [&](double bad) {
      double good = c;
      if (raw(t, bad)) return bad;
      for (int k = 0; k < 60 && std::abs(bad - good) > 1e-12 * (1.0 + std::abs(good)); ++k) {
        const double m = 0.5 * (good + bad);
        (raw(t, m) ? good : bad) = m;
      }
      return good;
    };
    cache = {id_, t, edge(lo), edge(hi)};
  }
  const double step = std::min(opt_.extension_step, 0.25 * (cache.hi - cache.lo));
  if (x < cache.lo) {
    const double a = *raw(t, cache.lo), b = raw(t, cache.lo + step).value_or(a);
    return a + (b - a) / step * (x - cache.lo);
  }
  if (x > cache.hi) {
    const double a = *raw(t, cache.hi), b = raw(t, cache.hi - step).value_or(a);
    return a + (a - b) / step * (x - cache.hi);
  }
  // isolated hole inside the trusted interval
  const double a = *raw(t, cache.lo), b = *raw(t, cache.hi);
  return a + (b - a) * (x - cache.lo) / (cache.hi - cache.lo);
}

DriftField compute_mu(const DistortionSpec& d, const DensityModel& density, const ScalarField& b,
                      const std::vector<double>& t_grid, const std::vector<double>& x_grid, double sigma) {
  check_grid(t_grid, x_grid);
  DriftOptions opt;
  opt.sigma = sigma;
  const DistortedDrift drift(d, density, b, opt);
  DriftField f;
  f.t_grid = t_grid;
  f.x_grid = x_grid;
  f.mu.resize(t_grid.size() * x_grid.size());
  std::vector<char> ok(x_grid.size());
  for (std::size_t it = 0; it < t_grid.size(); ++it) {
    std::span<double> row(f.mu.data() + it * x_grid.size(), x_grid.size());
    for (std::size_t ix = 0; ix < x_grid.size(); ++ix) {
      const auto v = drift.raw(t_grid[it], x_grid[ix]);
      ok[ix] = v.has_value();
      row[ix] = v.value_or(0.0);
    }
    f.untrusted += extend_slice(row, ok, x_grid, t_grid[it]);
  }
  f.provenance = "compute_mu(" + std::string(d.name()) + ")";
  return f;
}

DriftField compute_mu(const DistortionSpec& d, const DensityField& field, const ScalarField& b, double sigma) {
  DriftField f = compute_mu(d, static_cast<const DensityModel&>(field), b, field.t_grid(), field.x_grid(), sigma);
  f.provenance = "compute_mu(" + std::string(d.name()) + ", " + (field.method.empty() ? "field" : field.method) + ")";
  return f;
}

DriftField general_sigma_mu(const DistortionSpec& d, const DensityModel& density, const DiffusionSpec& spec,
                            const ScalarField& sigma_check, const ScalarField& sigma_check_dx,
                            const std::vector<double>& t_grid, const std::vector<double>& x_grid) {
  check_grid(t_grid, x_grid);
  if (!sigma_check) throw DomainError("sigma-check missing");
  auto scx = [&](double t, double x) {
    if (sigma_check_dx) return sigma_check_dx(t, x);
    const double h = 1e-5 * std::max(1.0, std::abs(x));
    return (sigma_check(t, x + h) - sigma_check(t, x - h)) / (2.0 * h);
  };
  DriftField f;
  f.t_grid = t_grid;
  f.x_grid = x_grid;
  f.mu.resize(t_grid.size() * x_grid.size());
  std::vector<char> ok(x_grid.size());
  const DriftOptions defaults;
  for (std::size_t it = 0; it < t_grid.size(); ++it) {
    const double t = t_grid[it];
    const auto [lo, hi] = density.reliable_range(t);
    std::span<double> row(f.mu.data() + it * x_grid.size(), x_grid.size());
    for (std::size_t ix = 0; ix < x_grid.size(); ++ix) {
      const double x = x_grid[ix];
      ok[ix] = 0;
      row[ix] = 0.0;
      if (!(x >= lo && x <= hi)) continue;
      const Prob G = density.survival(t, x);
      const double rho = density.rho(t, x);
      if (!(G.smaller() >= defaults.tail) || !(rho > 0.0)) continue;
      const double s = spec.s(t, x), sc = sigma_check(t, x);
      if (!(s > 0.0) || !(sc > 0.0)) throw DomainError("sigma and sigma-check must be positive at " + at(t, x));
      const Derivatives D = d.derivatives(t, G);
      if (!(D.dp * rho >= kSingular)) throw NumericError("distorted drift singular at " + at(t, x));
      const double b = spec.b(t, x);
      double mu;
      if (sc == s) {
        const double general = b + D.dt / (D.dp * rho) - sc * sc * rho * D.dpp / (2.0 * D.dp);
        mu = b + D.dt / (D.dp * rho) - 0.5 * (D.dpp / D.dp) * rho * s * s;
        if (std::abs(general - mu) > 1e-12 * (1.0 + std::abs(mu))) {
          throw ConsistencyError("sigma-check reduction failed at " + at(t, x));
        }
      } else {
        const double rx = density.rho_x(t, x);
        mu = b - s * spec.s_x(t, x) + sc * scx(t, x) + 0.5 * (sc * sc - s * s) * rx / rho + D.dt / (D.dp * rho) -
             sc * sc * rho * D.dpp / (2.0 * D.dp);
      }
      if (!std::isfinite(mu)) throw NumericError("drift not finite at " + at(t, x));
      row[ix] = mu;
      ok[ix] = 1;
    }
    f.untrusted += extend_slice(row, ok, x_grid, t);
  }
  f.provenance = "general_sigma_mu(" + std::string(d.name()) + ")";
  return f;
}

// ---------------- distorted PDE ----------------

namespace {

struct Sweep {
  std::vector<double> x;
  std::vector<double> s_nodes;  // increasing
  double dx;
};

Sweep prepare(const PdeGrid& grid, double s_min, double t_end, double sigma) {
  if (!(s_min > 0.0)) throw DomainError("s_min must be positive (the drift is singular at s = 0)");
  if (!(t_end > s_min)) throw DomainError("t_end must exceed s_min");
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
  double lo = grid.x_lo, hi = grid.x_hi;
  if (std::isnan(lo)) lo = grid.center - 8.0 * sigma * std::sqrt(t_end);
  if (std::isnan(hi)) hi = grid.center + 8.0 * sigma * std::sqrt(t_end);
  Sweep sw;
  sw.x = uniform_grid(lo, hi, grid.nx);
  sw.dx = (hi - lo) / static_cast<double>(grid.nx - 1);
  sw.s_nodes = time_nodes(s_min, t_end, grid.steps, grid.grading, grid.include);
  return sw;
}

// Backward sweep of m columns. after(k, W) sees the state at s_nodes[n-k].
void sweep(const DriftFn& mu, const Sweep& sw, double t_end, const PdeGrid& grid, double sigma, std::size_t m,
           std::vector<double>& W, const std::function<void(std::size_t, std::span<double>)>& after) {
  const std::size_t n = sw.s_nodes.size() - 1;
  std::vector<double> tau(n + 1);
  for (std::size_t k = 0; k <= n; ++k) tau[k] = t_end - sw.s_nodes[n - k];
  tau[0] = 0.0;
  ParabolicStepper stepper(sw.x, sigma, Boundary::Neumann, Boundary::Neumann, m);
  stepper.integrate(
      W, tau, grid.rannacher,
      [&](double ta, std::span<double> v) {
        const double s = t_end - ta;
        for (std::size_t j = 0; j < sw.x.size(); ++j) v[j] = mu(s, sw.x[j]);
      },
      [&](std::size_t k) { after(k, W); });
}

// clamp to [lo,hi] and make increasing in x; returns largest change
double project_increasing(std::span<double> u, std::size_t stride, double lo, double hi) {
  double worst = 0.0, run = lo;
  for (std::size_t j = 0; j * stride < u.size(); ++j) {
    double& v = u[j * stride];
    const double p = std::max(std::clamp(v, lo, hi), run);
    worst = std::max(worst, std::abs(p - v));
    v = p;
    run = p;
  }
  return worst;
}

}  // namespace

std::size_t PDESolution::index_of(double s) const {
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (std::abs(s_grid[i] - s) <= 1e-12 * std::max(1.0, std::abs(s))) return i;
  }
  throw DomainError("s = " + std::to_string(s) + " is not a node of the PDE solution");
}

double PDESolution::eval(double s, double x) const {
  double w;
  const std::size_t i = bracket(s_grid, s, w);
  const double a = interp(x_grid, slice(i), x);
  if (s_grid.size() == 1) return a;
  return (1.0 - w) * a + w * interp(x_grid, slice(i + 1), x);
}

MonotoneGrid PDESolution::slice_grid(std::size_t is) const {
  const auto sl = slice(is);
  return MonotoneGrid(x_grid, std::vector<double>(sl.begin(), sl.end()), Direction::Increasing);
}

PDESolution solve_distorted_pde(const DriftFn& mu, const MonotoneGrid& g, double s_min, double t_end,
                                const PdeGrid& grid, double sigma) {
  if (g.x().empty()) throw DomainError("terminal function missing");
  if (g.direction() != Direction::Increasing) throw DomainError("terminal function must be increasing");
  const Sweep sw = prepare(grid, s_min, t_end, sigma);
  const std::size_t nx = sw.x.size(), n = sw.s_nodes.size() - 1;
  PDESolution sol;
  sol.s_grid = sw.s_nodes;
  sol.x_grid = sw.x;
  sol.terminal = g;
  sol.u.resize((n + 1) * nx);
  const double lo = g.front(), hi = g.back();
  std::vector<double> W(nx);
  for (std::size_t j = 0; j < nx; ++j) W[j] = g(sw.x[j]);
  auto gradient = [&](std::span<const double> u) {
    return std::max(std::abs(u[2] - u[0]), std::abs(u[nx - 1] - u[nx - 3])) / (2.0 * sw.dx);
  };
  sol.boundary_gradient = gradient(W);
  sweep(mu, sw, t_end, grid, sigma, 1, W, [&](std::size_t k, std::span<double> w) {
    if (k > 0) sol.projection = std::max(sol.projection, project_increasing(w, 1, lo, hi));
    sol.boundary_gradient = std::max(sol.boundary_gradient, gradient(w));
    std::copy(w.begin(), w.end(), sol.u.begin() + static_cast<std::ptrdiff_t>((n - k) * nx));
  });
  if (sol.boundary_gradient > grid.max_boundary_gradient) {
    throw NumericError("PDE grid too narrow: boundary gradient " + std::to_string(sol.boundary_gradient) +
                       " exceeds " + std::to_string(grid.max_boundary_gradient) + "; widen x_lo/x_hi");
  }
  return sol;
}

std::vector<double> solve_distorted_pde_multi(const DriftFn& mu, const std::vector<std::function<double(double)>>& g,
                                              double s_min, double t_end, const PdeGrid& grid,
                                              std::vector<double>& x_out, double sigma) {
  if (g.empty()) throw DomainError("no terminal functions");
  const Sweep sw = prepare(grid, s_min, t_end, sigma);
  const std::size_t nx = sw.x.size(), m = g.size(), n = sw.s_nodes.size() - 1;
  std::vector<double> W(nx * m), lo(m), hi(m);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t j = 0; j < nx; ++j) W[j * m + c] = g[c](sw.x[j]);
    lo[c] = W[c];
    hi[c] = W[(nx - 1) * m + c];
    if (hi[c] < lo[c]) throw DomainError("terminal functions must be increasing");
  }
  double grad = 0.0;
  auto gradient = [&](std::span<const double> w) {
    for (std::size_t c = 0; c < m; ++c) {
      grad = std::max(grad, std::max(std::abs(w[2 * m + c] - w[c]), std::abs(w[(nx - 1) * m + c] - w[(nx - 3) * m + c])) /
                                (2.0 * sw.dx));
    }
  };
  gradient(W);
  sweep(mu, sw, t_end, grid, sigma, m, W, [&](std::size_t k, std::span<double> w) {
    if (k == 0) return;
    for (std::size_t c = 0; c < m; ++c) project_increasing(w.subspan(c), m, lo[c], hi[c]);
    gradient(w);
    (void)n;
  });
  if (grad > grid.max_boundary_gradient) {
    throw NumericError("PDE grid too narrow: boundary gradient " + std::to_string(grad) + "; widen x_lo/x_hi");
  }
  std::vector<double> out(nx * m);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t j = 0; j < nx; ++j) out[c * nx + j] = W[j * m + c];
  }
  x_out = sw.x;
  return out;
}

// ---------------- Q-dynamics Monte Carlo ----------------

namespace {

template <class Drift>
QSimResult simulate(const Drift& drift, const std::function<double(double)>& g, double s, double x, double t,
                    const QSimOptions& opt) {
  if (!(t > s) || !(s >= 0.0)) throw DomainError("simulation needs 0 <= s < t");
  if (opt.paths == 0 || opt.steps == 0 || opt.batches == 0) throw DomainError("simulation needs paths, steps, batches");
  if (!(opt.sigma > 0.0)) throw DomainError("sigma must be positive");
  const std::size_t B = std::min(opt.batches, opt.paths), ny = opt.y_grid.size();
  const double h = (t - s) / static_cast<double>(opt.steps), sq = opt.sigma * std::sqrt(h);
  std::vector<double> sums(B), counts(B);
  std::vector<std::vector<double>> surv(B, std::vector<double>(ny));
  std::vector<std::size_t> extrap(B);
  parallel_for(B, opt.threads, [&](std::size_t b) {
    const std::size_t lo = opt.paths * b / B, hi = opt.paths * (b + 1) / B;
    double sum = 0.0;
    std::size_t ex = 0;
    auto& sv = surv[b];
    for (std::size_t p = lo; p < hi; ++p) {
      PathRng rng(opt.seed, p, opt.stream);
      double X = x;
      for (std::size_t k = 0; k < opt.steps; ++k) {
        const double tk = s + h * static_cast<double>(k);
        X += drift(tk, X, ex) * h + sq * rng.normal();
      }
      sum += g(X);
      for (std::size_t c = 0; c < ny; ++c) sv[c] += X >= opt.y_grid[c] ? 1.0 : 0.0;
    }
    sums[b] = sum;
    counts[b] = static_cast<double>(hi - lo);
    extrap[b] = ex;
  });
  QSimResult r;
  r.paths = opt.paths;
  r.seed = opt.seed;
  std::vector<double> means(B);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    total += sums[b];
    means[b] = sums[b] / counts[b];
    r.extrapolated += extrap[b];
  }
  r.mean = total / static_cast<double>(opt.paths);
  r.std_error = batch_stats(means).std_error;
  r.survival.assign(ny, 0.0);
  r.survival_se.assign(ny, 0.0);
  for (std::size_t c = 0; c < ny; ++c) {
    double tot = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      tot += surv[b][c];
      means[b] = surv[b][c] / counts[b];
    }
    r.survival[c] = tot / static_cast<double>(opt.paths);
    r.survival_se[c] = batch_stats(means).std_error;
  }
  return r;
}

}  // namespace

QSimResult simulate_q_dynamics(const DriftField& mu, const std::function<double(double)>& g, double s, double x,
                               double t, const QSimOptions& opt) {
  if (s < mu.t_grid.front() * (1.0 - 1e-12)) {
    throw DomainError("simulation starts before the drift field's first time " + std::to_string(mu.t_grid.front()));
  }
  if (opt.steps == 0) throw DomainError("simulation needs steps");
  // time interpolation once per step; x lookup by index on uniform grids
  const std::size_t nx = mu.x_grid.size();
  const double h = (t - s) / static_cast<double>(opt.steps);
  std::vector<double> rows(opt.steps * nx);
  for (std::size_t k = 0; k < opt.steps; ++k) {
    const double tk = s + h * static_cast<double>(k);
    for (std::size_t j = 0; j < nx; ++j) rows[k * nx + j] = mu.eval(tk, mu.x_grid[j]);
  }
  const bool uniform = is_uniform(mu.x_grid);
  const double x0 = mu.x_grid.front(), xn = mu.x_grid.back();
  const double dx = (xn - x0) / static_cast<double>(nx - 1);
  return simulate(
      [&](double tk, double X, std::size_t& ex) {
        const auto k = std::min(static_cast<std::size_t>(std::llround((tk - s) / h)), opt.steps - 1);
        const double* r = rows.data() + k * nx;
        std::size_t i;
        if (X < x0) {
          ++ex;
          return r[0] + (r[1] - r[0]) / (mu.x_grid[1] - x0) * (X - x0);
        }
        if (X > xn) {
          ++ex;
          return r[nx - 1] + (r[nx - 1] - r[nx - 2]) / (xn - mu.x_grid[nx - 2]) * (X - xn);
        }
        if (uniform) {
          i = std::min(static_cast<std::size_t>((X - x0) / dx), nx - 2);
        } else {
          i = static_cast<std::size_t>(std::upper_bound(mu.x_grid.begin(), mu.x_grid.end(), X) - mu.x_grid.begin());
          i = std::min(i == 0 ? 0 : i - 1, nx - 2);
        }
        const double w = (X - mu.x_grid[i]) / (mu.x_grid[i + 1] - mu.x_grid[i]);
        return (1.0 - w) * r[i] + w * r[i + 1];
      },
      g, s, x, t, opt);
}

QSimResult simulate_q_dynamics(const DriftFn& mu, const std::function<double(double)>& g, double s, double x,
                               double t, const QSimOptions& opt) {
  return simulate([&](double tk, double X, std::size_t&) { return mu(tk, X); }, g, s, x, t, opt);
}

// ---------------- Phi curves ----------------

double inverse_survival(const std::function<double(double)>& G, double p, double lo, double hi, double tol) {
  if (!(hi > lo)) throw DomainError("inverse survival needs lo < hi");
  if (G(lo) <= p) return lo;
  if (G(hi) > p) throw DomainError("probability " + std::to_string(p) + " not attained on the survival grid");
  while (hi - lo > tol * std::max(1.0, std::abs(lo) + std::abs(hi))) {
    const double m = 0.5 * (lo + hi);
    if (m <= lo || m >= hi) break;
    (G(m) <= p ? hi : lo) = m;
  }
  return hi;
}

double PhiCurve::operator()(double q) const {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("Phi argument outside [0,1]");
  return interp(p, phi, q);
}

PhiCurve build_phi_curve(const DistortionSpec& d, const DiffusionSpec& spec, const DensityModel& density, double s,
                         double t, double x, const std::vector<double>& p_grid, const PhiOptions& opt) {
  if (!(s > 0.0)) {
    throw DomainError("Phi(s,t,x;.) is undefined at s = 0: the law of X_s degenerates to a point mass");
  }
  if (!(t > s)) throw DomainError("Phi needs s < t");
  if (t > spec.T * (1.0 + 1e-12)) throw DomainError("t beyond the model horizon");
  const double s_min = std::isnan(opt.s_min) ? 1e-2 * spec.T : opt.s_min;
  if (s < s_min) throw DomainError("s below s_min = " + std::to_string(s_min));
  std::vector<double> interior;
  for (std::size_t i = 0; i < p_grid.size(); ++i) {
    const double p = p_grid[i];
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p grid must lie in [0,1]");
    if (i > 0 && !(p > p_grid[i - 1])) throw DomainError("p grid must increase");
    if (p > 0.0 && p < 1.0) interior.push_back(p);
  }
  const double sigma = spec.constant_sigma.value_or(1.0);
  if (!spec.constant_sigma) throw DomainError("Phi curves need constant sigma; apply the Lamperti transform first");

  PhiCurve c;
  c.s = s;
  c.t = t;
  c.x = x;
  c.family = std::string(d.name());
  c.p.push_back(0.0);
  c.phi.push_back(0.0);
  c.y.push_back(std::numeric_limits<double>::quiet_NaN());

  // P-side inverse survival
  std::vector<double> y(interior.size());
  const double tau = t - s;
  if (spec.gaussian()) {
    double m = x + spec.constant_drift.value_or(0.0) * tau;
    double sd = sigma * std::sqrt(tau);
    if (spec.ou_rate) {
      const double k = *spec.ou_rate;
      m = x * std::exp(-k * tau);
      sd = sigma * std::sqrt(-std::expm1(-2.0 * k * tau) / (2.0 * k));
    }
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = m + sd * normal::quantile_upper(interior[i]);
  } else {
    PdeGrid g = opt.grid;
    g.center = x;
    const Sweep sw = prepare(g, s, t, sigma);
    const auto surv = conditional_survival_pde(spec, s, x, t, sw.x, opt.delta_reg, g.steps);
    std::vector<double> gp(surv.size());
    for (std::size_t j = 0; j < surv.size(); ++j) gp[j] = surv[j].p;
    const MonotoneGrid G(sw.x, gp, Direction::Decreasing);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = inverse_survival([&](double v) { return G(v); }, interior[i], sw.x.front(), sw.x.back());
    }
  }

  std::vector<double> q(interior.size());
  if (d.is_identity()) {
    q = interior;  // Q = P
    c.method = "identity";
  } else if (opt.monte_carlo) {
    const DistortedDrift mu(d, density, spec.drift, DriftOptions{sigma});
    QSimOptions mc = opt.mc;
    mc.y_grid = y;
    mc.sigma = sigma;
    const auto r = simulate_q_dynamics(DriftFn(std::cref(mu)), [](double) { return 0.0; }, s, x, t, mc);
    q = r.survival;
    c.method = "monte_carlo";
  } else {
    const DistortedDrift mu(d, density, spec.drift, DriftOptions{sigma});
    PdeGrid g = opt.grid;
    g.center = x;
    double lo = g.x_lo, hi = g.x_hi;
    if (std::isnan(lo)) lo = x - 8.0 * sigma * std::sqrt(t);
    if (std::isnan(hi)) hi = x + 8.0 * sigma * std::sqrt(t);
    g.x_lo = lo;
    g.x_hi = hi;
    const double width = 2.0 * (hi - lo) / static_cast<double>(g.nx - 1);
    std::vector<std::function<double(double)>> cols;
    for (double yk : y) cols.push_back([yk, width](double v) { return smoothed_indicator(v, yk, width); });
    std::vector<double> xs;
    const auto slices = solve_distorted_pde_multi(DriftFn(std::cref(mu)), cols, s, t, g, xs, sigma);
    for (std::size_t k = 0; k < y.size(); ++k) {
      q[k] = interp(xs, std::span<const double>(slices.data() + k * xs.size(), xs.size()), x);
    }
    c.method = "pde";
  }
  for (std::size_t i = 0; i < interior.size(); ++i) {
    c.p.push_back(interior[i]);
    c.phi.push_back(std::clamp(q[i], 0.0, 1.0));
    c.y.push_back(y[i]);
  }
  c.p.push_back(1.0);
  c.phi.push_back(1.0);
  c.y.push_back(std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 1; i < c.phi.size(); ++i) {
    if (!(c.phi[i] > c.phi[i - 1])) c.increasing = false;
  }
  return c;
}

// ---------------- lattice and convergence ----------------

TreeModel lattice_from_diffusion(const DiffusionSpec& spec, std::size_t N) {
  if (N == 0) throw DomainError("lattice needs N >= 1");
  if (!spec.unit_sigma()) throw DomainError("lattice needs sigma == 1; apply the Lamperti transform first");
  const double h = spec.T / static_cast<double>(N), sq = std::sqrt(h);
  std::vector<double> times(N + 1);
  for (std::size_t i = 0; i <= N; ++i) times[i] = h * static_cast<double>(i);
  times.back() = spec.T;
  Ragged<double> states(N + 1), up(N);
  for (std::size_t i = 0; i <= N; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      states(i, j) = spec.x0 + (2.0 * static_cast<double>(j) - static_cast<double>(i)) * sq;
    }
  }
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double x = states(i, j);
      const double b = spec.b(times[i], x);
      if (!(std::abs(b) * sq < 1.0)) {
        const double need = std::floor(spec.T * b * b) + 1.0;
        throw NumericError("lattice too coarse: |b| sqrt(h) >= 1 at (t=" + std::to_string(times[i]) +
                           ", x=" + std::to_string(x) + "); use N > " + std::to_string(static_cast<long long>(need)) +
                           " at least");
      }
      const double p = 0.5 + 0.5 * b * sq;
      const double mean = (2.0 * p - 1.0) * sq;
      const double var = h - mean * mean;
      if (std::abs(mean - b * h) > 1e-12 * (h + std::abs(b) * h) ||
          std::abs(var - (h - b * b * h * h)) > 1e-12 * h) {
        throw NumericError("lattice moment check failed at (t=" + std::to_string(times[i]) + ")");
      }
      up(i, j) = p;
    }
  }
  return TreeModel(std::move(times), std::move(states), std::move(up));
}

ConvergenceTable convergence_study(const DiffusionSpec& spec, const DistortionSpec& d,
                                   const std::function<double(double)>& g, const std::vector<std::size_t>& N_list,
                                   double t, double x, const ConvergenceOptions& opt) {
  if (N_list.empty()) throw DomainError("convergence study needs at least one N");
  for (std::size_t i = 1; i < N_list.size(); ++i) {
    if (!(N_list[i] > N_list[i - 1])) throw DomainError("N list must increase");
  }
  if (!(t > 0.0 && t < spec.T)) throw DomainError("evaluation time must lie in (0, T)");
  ConvergenceTable tab;
  tab.t = t;
  tab.x = x;
  std::unique_ptr<DensityModel> density;
  if (spec.gaussian()) density = std::make_unique<GaussianDensity>(spec);
  if (opt.reference) {
    tab.reference = *opt.reference;
    tab.reference_method = "supplied";
  } else {
    if (!density) {
      const double half = 8.0 * std::sqrt(spec.T);
      const auto tg = time_nodes(1e-2 * spec.T, spec.T, 100, Grading::Sqrt);
      density = std::make_unique<DensityField>(
          solve_survival_pde(spec, tg, uniform_grid(spec.x0 - half, spec.x0 + half, 1601)));
    }
    const DistortedDrift mu(d, *density, spec.drift);
    PdeGrid grid = opt.grid;
    grid.center = spec.x0;
    double lo = grid.x_lo, hi = grid.x_hi;
    if (std::isnan(lo)) lo = spec.x0 - 8.0 * std::sqrt(spec.T);
    if (std::isnan(hi)) hi = spec.x0 + 8.0 * std::sqrt(spec.T);
    const auto gx = uniform_grid(lo, hi, 4001);
    const auto sol = solve_distorted_pde(DriftFn(std::cref(mu)), MonotoneGrid::sample(g, gx, Direction::Increasing),
                                         t, spec.T, grid);
    tab.reference = sol.eval(t, x);
    tab.reference_method = "pde";
  }
  for (std::size_t N : N_list) {
    ConvergenceRow row;
    row.N = N;
    const double level = t * static_cast<double>(N) / spec.T;
    const auto i = static_cast<std::size_t>(std::llround(level));
    if (std::abs(level - static_cast<double>(i)) > 1e-9) {
      throw DomainError("t is not a lattice time for N = " + std::to_string(N));
    }
    const DistortedTree dt = distort_tree(lattice_from_diffusion(spec, N), d, Mon2Mode::Permissive);
    row.mon2_violations = dt.violations().size();
    if (row.mon2_violations > 0) {
      row.skipped = true;
      tab.rows.push_back(row);
      continue;
    }
    std::vector<double> gN(N + 1);
    for (std::size_t j = 0; j <= N; ++j) gN[j] = g(dt.base().state(N, j));
    const auto u = backward_induction(dt, gN, N);
    std::vector<double> xs(i + 1);
    for (std::size_t j = 0; j <= i; ++j) xs[j] = dt.base().state(i, j);
    if (x < xs.front() || x > xs.back()) throw DomainError("evaluation point outside the lattice");
    row.value = interp(xs, u.level(i), x);
    row.error = std::abs(row.value - tab.reference);
    if (spec.gaussian()) {
      const GaussianDensity gd(spec);
      double e = 0.0;
      for (std::size_t j = 0; j <= i; ++j) e = std::max(e, std::abs(dt.survival(i, j).p - gd.survival(t, xs[j]).p));
      row.survival_error = e;
    }
    tab.rows.push_back(row);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  double prev = std::numeric_limits<double>::infinity();
  tab.monotone = true;
  for (const auto& r : tab.rows) {
    if (r.skipped) continue;
    if (!(r.error < prev)) tab.monotone = false;
    prev = r.error;
    if (!(r.error > 0.0)) continue;
    const double lx = std::log(static_cast<double>(r.N)), ly = std::log(r.error);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    n += 1;
  }
  if (n >= 2) tab.order = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
  return tab;
}

}  // namespace distort
