#include "selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "distort/choquet.hpp"
#include "distort/density.hpp"
#include "distort/dynamics.hpp"
#include "distort/error.hpp"
#include "distort/normal.hpp"

namespace distort::selftest {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g3(double v) { return fmt("%.3g", v); }

// Accumulates named sub-checks into one verdict.
struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void check(bool ok, const std::string& what) {
    if (!detail.str().empty()) detail << "; ";
    detail << what << (ok ? "" : " FAILED");
    pass = pass && ok;
  }
};

Result finish(int id, Verdict& v, Clock::time_point t0) {
  Result r;
  r.id = id;
  r.pass = v.pass;
  r.detail = v.detail.str();
  r.seconds = seconds_since(t0);
  return r;
}

Clock::time_point g_suite_start = Clock::now();
bool g_full_suite = false;

// ---------- tree criteria ----------

Result two_period_naive_static(const Options& o) {
  const auto t0 = Clock::now();
  const auto tree = TreeModel::symmetric(2, 0.0, 1.0, 1.0, 0.5);
  const auto d = DistortionSpec::power(2.0);
  const std::vector<double> g{0.0, 1.0, 2.0};
  double naive = 0, stat = 0, best = 1e9;
  for (int k = 0; k < 3; ++k) {
    const auto a = Clock::now();
    naive = naive_nested_expectation(tree, d, g);
    stat = static_expectation(tree, d, g);
    best = std::min(best, seconds_since(a));
  }
  const double tol = 1e-12 * o.tolerance_scale;
  Verdict v;
  v.check(std::abs(naive - 0.5) <= tol, "naive " + fmt("%.17g", naive));
  v.check(std::abs(stat - 0.625) <= tol, "static " + fmt("%.17g", stat));
  v.check(best < 1e-3, "runtime " + g3(best * 1e3) + " ms");
  return finish(1, v, t0);
}

Result two_period_consistent(const Options& o) {
  const auto t0 = Clock::now();
  const auto tree = TreeModel::symmetric(2, 0.0, 1.0, 1.0, 0.5);
  const auto d = DistortionSpec::power(2.0);
  const std::vector<double> g{0.0, 1.0, 2.0};
  const auto dt = distort_tree(tree, d, Mon2Mode::Strict);
  const double tol = 1e-12 * o.tolerance_scale;
  const double q00 = dt.q_up(0, 0);
  const double phi_low = phi_at_node(dt, 1, 0, 2)(0.5);
  const double phi_high = phi_at_node(dt, 1, 1, 2)(0.5);
  const double tower = backward_induction(dt, g, 2)(0, 0);
  const double stat = static_expectation(tree, d, g);
  Verdict v;
  v.check(std::abs(q00 - 0.25) <= tol, "q00 " + fmt("%.17g", q00));
  v.check(std::abs(phi_low - 5.0 / 12.0) <= tol, "Phi(x=-1) " + fmt("%.17g", phi_low));
  v.check(std::abs(phi_high - 0.25) <= tol, "Phi(x=1) " + fmt("%.17g", phi_high));
  v.check(std::abs(tower - 0.625) <= tol && std::abs(tower - stat) <= tol, "tower " + fmt("%.17g", tower));
  return finish(2, v, t0);
}

Result random_tree_properties(const Options& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(o.seed);
  double tower = 0.0, qflow = 0.0;
  std::size_t triples = 0, redraws = 0;
  for (int n = 0; n < 200; ++n) {
    const TreeModel tree = random_tree(rng, 12);
    const double horizon = tree.time(tree.periods());
    DistortedTree dt;
    for (int attempt = 0;; ++attempt) {
      dt = distort_tree(tree, random_distortion(rng, horizon), Mon2Mode::Permissive);
      if (dt.violations().empty()) break;
      if (attempt == 1000) throw ConsistencyError("no mon2-compatible family found for random tree");
      ++redraws;
    }
    qflow = std::max(qflow, verify_initial_consistency(dt));
    const std::size_t N = tree.periods();
    for (int k = 0; k < 5; ++k) {
      const auto gi = random_index_payoff(rng, N);
      for (std::size_t t = 2; t <= N; ++t) {
        const auto gt = payoff_on_level(gi, N, t);
        for (std::size_t s = 1; s < t; ++s) {
          for (std::size_t r = 0; r < s; ++r) {
            tower = std::max(tower, verify_tower(dt, gt, r, s, t).max_discrepancy);
            ++triples;
          }
        }
      }
    }
  }
  const double tol = 1e-10 * o.tolerance_scale;
  const double secs = seconds_since(t0);
  Verdict v;
  v.check(tower <= tol, "tower " + g3(tower) + " over " + std::to_string(triples) + " triples");
  v.check(qflow <= tol, "Q-survival " + g3(qflow));
  v.check(secs < 10.0, "runtime " + g3(secs) + " s");
  v.detail << " (" << redraws << " family redraws)";
  return finish(3, v, t0);
}

Result crossing_tree(const Options& o) {
  const auto t0 = Clock::now();
  const auto sq = DistortionSpec::power(2.0), id = DistortionSpec::identity();
  const double r_sq = crossing_tree_residual(0.5, 0.5, sq, sq);
  const double r_id = crossing_tree_residual(0.5, 0.5, id, id);
  const double tol = 1e-12 * o.tolerance_scale;
  Verdict v;
  v.check(std::abs(r_sq + 0.125) <= tol, "p^2 residual " + fmt("%.17g", r_sq));
  v.check(std::abs(r_id) <= tol, "identity residual " + fmt("%.17g", r_id));
  return finish(4, v, t0);
}

// ---------- dynamics criteria ----------

std::vector<double> linspace(double a, double b, std::size_t n) { return uniform_grid(a, b, n); }

Result wang_drift(const Options& o) {
  const auto t0 = Clock::now();
  const double alpha = 0.5;
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const auto d = DistortionSpec::wang(alpha);
  Verdict v;
  {
    const auto tg = linspace(0.1, 1.0, 19), xg = linspace(-4.0, 4.0, 81);
    const auto mu = compute_mu(d, gaussian_field(spec, tg, xg), spec.drift);
    double err = 0.0;
    for (std::size_t i = 0; i < tg.size(); ++i) {
      for (std::size_t j = 0; j < xg.size(); ++j) err = std::max(err, std::abs(mu.at(i, j) - alpha / (2.0 * std::sqrt(tg[i]))));
    }
    v.check(err <= 1e-6 * o.tolerance_scale && mu.untrusted == 0, "closed-form density sup error " + g3(err));
  }
  {
    const std::vector<double> tg{0.1, 0.25, 0.5, 0.75, 1.0};
    const auto xg = linspace(-4.0, 4.0, 9);
    BridgeOptions bo;
    bo.paths = 100000;
    bo.seed = o.seed;
    bo.threads = o.threads;
    const auto field = bridge_field(spec, tg, xg, bo);
    const auto mu = compute_mu(d, field, spec.drift);
    double worst = 0.0;
    for (std::size_t i = 0; i < tg.size(); ++i) {
      for (std::size_t j = 0; j < xg.size(); ++j) {
        const std::size_t k = i * xg.size() + j;
        const double exact = alpha / (2.0 * std::sqrt(tg[i]));
        const Prob G = field.G_at(i, j);
        const double rel = std::max(field.rho_se[k] / field.rho_at(i, j), field.G_se[k] / G.smaller());
        const double tol = (3.0 * std::abs(exact) * rel + 1e-6) * o.tolerance_scale;
        worst = std::max(worst, std::abs(mu.at(i, j) - exact) / tol);
      }
    }
    v.check(worst <= 1.0, "bridge density error/(3 SE + 1e-6) max " + g3(worst));
  }
  const double secs = seconds_since(t0);
  v.check(secs < 30.0, "runtime " + g3(secs) + " s");
  return finish(5, v, t0);
}

Result wang_phi(const Options& o) {
  const auto t0 = Clock::now();
  const double alpha = 0.5;
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const auto d = DistortionSpec::wang(alpha);
  const GaussianDensity density(spec);
  std::vector<double> pg;
  for (int i = 1; i <= 19; ++i) pg.push_back(0.05 * i);
  PhiOptions po;
  po.grid.nx = 3201;
  Verdict v;
  auto sup_error = [&](const PhiCurve& c, const std::function<double(double)>& exact) {
    double e = 0.0;
    for (std::size_t i = 0; i < c.p.size(); ++i) {
      if (c.p[i] < 0.05 - 1e-12 || c.p[i] > 0.95 + 1e-12) continue;
      e = std::max(e, std::abs(c.phi[i] - exact(c.p[i])));
    }
    return e;
  };
  {
    const double s = 0.25, t = 1.0;
    const auto c = build_phi_curve(d, spec, density, s, t, 0.0, pg, po);
    const double shift = alpha * (std::sqrt(t) - std::sqrt(s)) / std::sqrt(t - s);
    const double e = sup_error(c, [&](double p) { return normal::cdf(normal::quantile(p) + shift); });
    v.check(e <= 1e-3 * o.tolerance_scale && c.increasing, "(s,t)=(0.25,1) sup error " + g3(e));
  }
  {
    po.s_min = 1e-4;
    const auto c = build_phi_curve(d, spec, density, 1e-4, 1.0, 0.0, pg, po);
    const double e = sup_error(c, [&](double p) { return d.eval(1.0, p); });
    v.check(e <= 2e-3 * o.tolerance_scale && c.increasing, "s=1e-4 vs phi sup error " + fmt("%.4g", e));
  }
  return finish(6, v, t0);
}

Result tree_pde_convergence(const Options& o) {
  const auto t0 = Clock::now();
  const double alpha = 0.5, w = 0.2, t = 0.5, T = 1.0;
  const auto spec = DiffusionSpec::brownian(0.0, T);
  const auto d = DistortionSpec::wang(alpha);
  auto g = [w](double x) { return normal::cdf(x / w); };
  const double m = alpha * (std::sqrt(T) - std::sqrt(t));
  ConvergenceOptions co;
  co.reference = normal::cdf(m / std::sqrt(w * w + (T - t)));
  const auto tab = convergence_study(spec, d, g, {64, 256, 1024, 4096}, t, 0.0, co);
  Verdict v;
  std::string errs;
  bool strict = true, all_run = true;
  double prev = INFINITY, prevG = INFINITY;
  bool g_dec = true;
  for (const auto& r : tab.rows) {
    if (r.skipped) all_run = false;
    errs += (errs.empty() ? "" : ",") + g3(r.error);
    if (!(r.error < prev)) strict = false;
    if (!(r.survival_error < prevG)) g_dec = false;
    prev = r.error;
    prevG = r.survival_error;
  }
  v.check(all_run && strict, "errors " + errs);
  v.check(tab.rows.back().error <= 1e-2 * o.tolerance_scale, "final " + g3(tab.rows.back().error));
  v.check(g_dec, "G^N sup error decreasing");
  const double secs = seconds_since(t0);
  v.check(secs < 60.0, "runtime " + g3(secs) + " s");
  return finish(7, v, t0);
}

Result pde_vs_mc(const Options& o) {
  const auto t0 = Clock::now();
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const GaussianDensity density(spec);
  const auto d = DistortionSpec::kahneman_tversky(0.61);
  const auto mu = compute_mu(d, density, spec.drift, linspace(0.1, 1.0, 91), linspace(-8.0, 8.0, 321));
  auto g = [](double x) { return normal::cdf(x / 0.5); };
  PdeGrid grid;
  grid.include = {0.25, 0.5, 0.75};
  const auto sol = solve_distorted_pde(mu.as_function(), MonotoneGrid::sample(g, linspace(-10.0, 10.0, 4001), Direction::Increasing),
                                       0.1, 1.0, grid);
  const double probes[5][2] = {{0.25, 0.0}, {0.25, -0.5}, {0.5, 0.3}, {0.75, -0.2}, {0.1, 0.5}};
  Verdict v;
  for (int k = 0; k < 5; ++k) {
    QSimOptions q;
    q.paths = 100000;
    q.steps = 250;
    q.seed = o.seed;
    q.stream = static_cast<std::uint32_t>(k);
    q.threads = o.threads;
    const auto r = simulate_q_dynamics(mu, g, probes[k][0], probes[k][1], 1.0, q);
    const double u = sol.eval(probes[k][0], probes[k][1]);
    const double tol = (3.0 * r.std_error + 1e-3) * o.tolerance_scale;
    v.check(std::abs(u - r.mean) <= tol, "probe " + std::to_string(k) + " |u-MC| " + g3(std::abs(u - r.mean)) +
                                             " tol " + g3(tol));
  }
  const double secs = seconds_since(t0);
  v.check(secs < 30.0, "runtime " + g3(secs) + " s");
  return finish(8, v, t0);
}

// ---------- density ----------

Result density_agreement(const Options& o) {
  const auto t0 = Clock::now();
  Verdict v;
  for (double b : {0.0, 0.5}) {
    const auto spec = DiffusionSpec::constant(b, 0.0, 1.0);
    const GaussianDensity closed(spec);
    const auto fp = solve_survival_pde(spec, {0.01, 0.25, 1.0}, uniform_grid(-8.0, 8.5, 1651));
    double worst = 0.0;
    bool exact_zero = true;
    for (double t : {0.25, 1.0}) {
      for (int i = 0; i <= 12; ++i) {
        const double x = -3.0 + 0.5 * i;
        BridgeOptions bo;
        bo.seed = o.seed;
        bo.stream = static_cast<std::uint32_t>(i + (t < 0.5 ? 0 : 13));
        bo.threads = o.threads;
        const auto br = bridge_density_mc(spec, t, x, bo);
        const double c = closed.rho(t, x), f = fp.rho(t, x);
        const double tol_d = 1e-3 * o.tolerance_scale;
        const double tol_mc = std::max(1e-3, 3.0 * br.std_error) * o.tolerance_scale;
        worst = std::max({worst, std::abs(c - f) / tol_d, std::abs(c - br.value) / tol_mc, std::abs(f - br.value) / tol_mc});
        if (b == 0.0 && (br.std_error != 0.0 || std::abs(br.value - c) > 1e-14 * c)) exact_zero = false;
      }
    }
    v.check(worst <= 1.0, "b=" + g3(b) + " worst pairwise gap/tol " + g3(worst));
    if (b == 0.0) v.check(exact_zero, "b=0 bridge exact with zero variance");
  }
  return finish(9, v, t0);
}

// ---------- invariants ----------

Result invariants(const Options& o) {
  const auto t0 = Clock::now();
  const double sc = o.tolerance_scale;
  Verdict v;
  std::mt19937_64 rng(o.seed ^ 0x5eedu);

  // maximum principle and monotone slices
  {
    const auto spec = DiffusionSpec::brownian(0.0, 1.0);
    const GaussianDensity density(spec);
    auto g = [](double x) { return 0.2 + 0.6 * normal::cdf((x - 0.3) / 0.3); };
    const auto G = MonotoneGrid::sample(g, uniform_grid(-10.0, 10.0, 2001), Direction::Increasing);
    double worst_bound = 0.0, worst_mono = 0.0;
    for (const auto& d : {DistortionSpec::wang(0.5), DistortionSpec::kahneman_tversky(0.61), DistortionSpec::power(2.0)}) {
      const DistortedDrift mu(d, density, spec.drift);
      PdeGrid grid;
      // the p^2 drift grows like -x/(2t), so the domain has to be wide
      grid.x_lo = -20.0;
      grid.x_hi = 20.0;
      grid.nx = 1601;
      grid.steps = 400;
      const auto sol = solve_distorted_pde(DriftFn(std::cref(mu)), G, 0.05, 1.0, grid);
      for (std::size_t i = 0; i < sol.s_grid.size(); ++i) {
        const auto u = sol.slice(i);
        for (std::size_t j = 0; j < u.size(); ++j) {
          worst_bound = std::max({worst_bound, G.front() - u[j], u[j] - G.back()});
          if (j > 0) worst_mono = std::max(worst_mono, u[j - 1] - u[j]);
        }
      }
    }
    v.check(worst_bound <= 1e-12 * sc, "maximum principle " + g3(worst_bound));
    v.check(worst_mono <= 1e-12 * sc, "monotone slices " + g3(worst_mono));
  }
  // distorted pmf sums to one
  {
    double worst = 0.0;
    bool nonneg = true;
    for (int k = 0; k < 200; ++k) {
      const std::size_t n = 1 + rng() % 20;
      std::vector<double> x(n), p(n);
      double acc = 0.0, tot = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += 0.1 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        x[i] = acc;
        p[i] = 0.01 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        tot += p[i];
      }
      for (auto& q : p) q /= tot;
      double sum = 0.0;
      try {
        const DiscreteRV rv(x, p);
        const auto d = random_distortion(rng, 1.0);
        for (double q : distorted_pmf(rv, d, 0.5)) {
          sum += q;
          if (q < 0.0) nonneg = false;
        }
        worst = std::max(worst, std::abs(sum - 1.0));
      } catch (const DomainError&) {
        // normalization of p can miss 1 by more than the tolerance; skip such draws
      }
    }
    v.check(worst <= 1e-12 * sc && nonneg, "distorted pmf normalization " + g3(worst));
  }
  // sigma-check = sigma reduces to compute_mu
  {
    const auto spec = DiffusionSpec::constant(0.3, 0.0, 1.0).with_constant_sigma(1.3);
    const GaussianDensity density(spec);
    const auto d = DistortionSpec::prelec(1.0, 0.65);
    const auto tg = uniform_grid(0.1, 1.0, 10), xg = uniform_grid(-4.0, 4.0, 41);
    const auto a = compute_mu(d, density, spec.drift, tg, xg, 1.3);
    const auto b = general_sigma_mu(
        d, density, spec, [](double, double) { return 1.3; }, [](double, double) { return 0.0; }, tg, xg);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.mu.size(); ++k) worst = std::max(worst, std::abs(a.mu[k] - b.mu[k]) / (1.0 + std::abs(a.mu[k])));
    v.check(worst <= 1e-12 * sc, "sigma-check reduction " + g3(worst));
  }
  // analytic derivatives against central differences
  {
    const std::vector<DistortionSpec> fams{
        DistortionSpec::power(2.0),         DistortionSpec::power(0.5),
        DistortionSpec::kahneman_tversky(0.61), DistortionSpec::tversky_fox(0.7, 0.6),
        DistortionSpec::prelec(1.0, 0.65),  DistortionSpec::wang(0.5),
        DistortionSpec::separable({TimeWeight::Kind::Linear, 0.2, 0.8, 0.0}, DistortionSpec::prelec(1.0, 0.65), 1.0),
        DistortionSpec::separable({TimeWeight::Kind::Exponential, 1.0, 0.3, 2.0}, DistortionSpec::wang(-0.4), 1.0)};
    double worst = 0.0;
    const double h = 1e-5, t = 0.5;
    for (const auto& d : fams) {
      for (int i = 1; i <= 9; ++i) {
        const double p = 0.1 * i;
        const auto D = d.derivatives(t, p);
        const auto Dp = d.derivatives(t, p + h), Dm = d.derivatives(t, p - h);
        const auto Tp = d.derivatives(t + h, p), Tm = d.derivatives(t - h, p);
        const double fd[5] = {(d.eval(t, p + h) - d.eval(t, p - h)) / (2 * h), (Dp.dp - Dm.dp) / (2 * h),
                              (Dp.dpp - Dm.dpp) / (2 * h), (d.eval(t + h, p) - d.eval(t - h, p)) / (2 * h),
                              (Tp.dp - Tm.dp) / (2 * h)};
        const double an[5] = {D.dp, D.dpp, D.dppp, D.dt, D.dtp};
        for (int k = 0; k < 5; ++k) worst = std::max(worst, std::abs(an[k] - fd[k]) / (1.0 + std::abs(an[k])));
      }
    }
    v.check(worst <= 1e-6 * sc, "derivatives vs differences " + g3(worst));
  }
  if (g_full_suite) {
    const double total = seconds_since(g_suite_start);
    v.check(total < 180.0, "suite runtime " + g3(total) + " s");
  }
  return finish(10, v, t0);
}

}  // namespace

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "tree", "two-period naive and static Choquet values", two_period_naive_static},
      {2, "tree", "two-period consistent construction", two_period_consistent},
      {3, "tree", "tower and Q-flow on random trees", random_tree_properties},
      {4, "tree", "crossing-tree nonexistence residual", crossing_tree},
      {5, "dynamics", "Wang drift closed form", wang_drift},
      {6, "dynamics", "Wang Phi closed form and small-s limit", wang_phi},
      {7, "dynamics", "tree to PDE convergence", tree_pde_convergence},
      {8, "dynamics", "PDE vs Monte Carlo cross-validation", pde_vs_mc},
      {9, "density", "density cross-estimator agreement", density_agreement},
      {10, "invariants", "invariant suites", invariants},
  };
  return all;
}

bool selected(const Criterion& c, const std::string& filter) {
  if (filter.empty()) return true;
  std::stringstream ss(filter);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(' '));
    tok.erase(tok.find_last_not_of(' ') + 1);
    if (tok == c.suite || tok == std::to_string(c.id) || tok == "AC" + std::to_string(c.id)) return true;
  }
  return false;
}

std::vector<Result> run(const Options& opt, const std::function<void(const Result&)>& on_result) {
  g_suite_start = Clock::now();
  std::size_t n_sel = 0;
  for (const auto& c : criteria()) n_sel += selected(c, opt.filter) ? 1 : 0;
  g_full_suite = n_sel == criteria().size();
  std::vector<Result> out;
  for (const auto& c : criteria()) {
    if (!selected(c, opt.filter)) continue;
    Result r;
    const auto t0 = Clock::now();
    try {
      r = c.run(opt);
    } catch (const std::exception& e) {
      r.id = c.id;
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
      r.seconds = seconds_since(t0);
    }
    r.suite = c.suite;
    r.title = c.title;
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_line(const Result& r) {
  char head[128];
  std::snprintf(head, sizeof head, "[%s] AC%-2d %-44s (%7.3f s)  ", r.pass ? "PASS" : "FAIL", r.id, r.title.c_str(),
                r.seconds);
  return head + r.detail;
}

// ---------- generators ----------

TreeModel random_tree(std::mt19937_64& rng, std::size_t max_periods, double up_lo, double up_hi) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::size_t N = 1 + rng() % max_periods;
  std::vector<double> times(N + 1, 0.0);
  for (std::size_t i = 1; i <= N; ++i) times[i] = times[i - 1] + 0.2 + 0.8 * U(rng);
  Ragged<double> states(N + 1), up(N);
  for (std::size_t i = 0; i <= N; ++i) {
    double x = -static_cast<double>(i) * (0.3 + 0.7 * U(rng));
    for (std::size_t j = 0; j <= i; ++j) {
      states(i, j) = x;
      x += 0.1 + U(rng);
    }
  }
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j <= i; ++j) up(i, j) = up_lo + (up_hi - up_lo) * U(rng);
  }
  return TreeModel(std::move(times), std::move(states), std::move(up));
}

DistortionSpec random_distortion(std::mt19937_64& rng, double horizon) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto base = [&](int k) {
    switch (k) {
      case 0: return DistortionSpec::power(0.4 + 2.1 * U(rng));
      case 1: return DistortionSpec::kahneman_tversky(0.5 + 0.45 * U(rng));
      case 2: return DistortionSpec::tversky_fox(0.5 + U(rng), 0.5 + 0.45 * U(rng));
      case 3: return DistortionSpec::prelec(0.5 + U(rng), 0.5 + 0.45 * U(rng));
      default: return DistortionSpec::wang(-1.0 + 2.0 * U(rng));
    }
  };
  const int k = static_cast<int>(rng() % 7);
  if (k < 5) return base(k);
  const DistortionSpec b = base(static_cast<int>(rng() % 5));
  if (k == 5) {
    const double a = U(rng), end = U(rng);
    return DistortionSpec::separable({TimeWeight::Kind::Linear, a, (end - a) / horizon, 0.0}, b, horizon);
  }
  return DistortionSpec::separable({TimeWeight::Kind::Exponential, U(rng), U(rng), 2.0 * U(rng)}, b, horizon);
}

std::vector<double> random_index_payoff(std::mt19937_64& rng, std::size_t N) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> g(2 * N + 1, 0.0);
  for (std::size_t m = 1; m < g.size(); ++m) g[m] = g[m - 1] + (U(rng) < 0.2 ? 0.0 : U(rng));
  const double top = g.back() > 0.0 ? g.back() : 1.0;
  for (auto& v : g) v /= top;
  return g;
}

std::vector<double> payoff_on_level(const std::vector<double>& by_index, std::size_t N, std::size_t n) {
  std::vector<double> g(n + 1);
  for (std::size_t j = 0; j <= n; ++j) g[j] = by_index[2 * j + N - n];
  return g;
}

}  // namespace distort::selftest
