#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>

#include "distort/choquet.hpp"
#include "distort/density.hpp"
#include "distort/dynamics.hpp"
#include "distort/error.hpp"
#include "distort/io.hpp"
#include "distort/normal.hpp"
#include "distort/tree.hpp"

namespace distort::cli {

namespace fs = std::filesystem;
using io::format_double;

namespace {

class Phase {
 public:
  Phase(RunReport& rr, std::string name) : rr_(rr), name_(std::move(name)), t0_(std::chrono::steady_clock::now()) {
    spdlog::debug("{}: start", name_);
  }
  ~Phase() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    rr_.timing[name_] += s;
    spdlog::info("{}: {:.3f} s", name_, s);
  }

 private:
  RunReport& rr_;
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
};

std::ofstream csv(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  return f;
}

DistortionSpec make_distortion(const json& j) {
  try {
    return io::distortion_from_json(j.dump());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("distortion: ") + e.what());
  }
}

double need(const json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw ConfigError(std::string(what) + " needs \"" + key + "\"");
  return j.at(key).get<double>();
}

DiffusionSpec make_diffusion(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const double x0 = j.value("x0", 0.0), T = j.value("T", 1.0);
  DiffusionSpec s;
  if (kind == "brownian") {
    s = DiffusionSpec::brownian(x0, T);
  } else if (kind == "constant") {
    s = DiffusionSpec::constant(need(j, "drift", "constant diffusion"), x0, T);
  } else if (kind == "ornstein_uhlenbeck") {
    s = DiffusionSpec::ornstein_uhlenbeck(need(j, "rate", "ornstein_uhlenbeck diffusion"), x0, T);
  } else {
    s = DiffusionSpec::tanh_drift(need(j, "amplitude", "tanh diffusion"), j.value("scale", 1.0), x0, T);
  }
  if (j.contains("sigma")) {
    const auto& sg = j.at("sigma");
    s = sg.is_number() ? s.with_constant_sigma(sg.get<double>())
                       : s.with_tanh_sigma(sg.at("base").get<double>(), sg.at("amplitude").get<double>());
  }
  return s;
}

std::function<double(double)> make_payoff(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "smoothed_step") {
    const double c = j.at("center").get<double>(), w = j.at("width").get<double>();
    const double lo = j.value("low", 0.0), hi = j.value("high", 1.0);
    if (!(hi >= lo)) throw ConfigError("smoothed_step payoff needs high >= low");
    return [=](double x) { return lo + (hi - lo) * normal::cdf((x - c) / w); };
  }
  const double k = j.at("strike").get<double>(), cap = j.at("cap").get<double>();
  return [=](double x) { return std::min(std::max(x - k, 0.0), cap); };
}

std::vector<double> axis(const json& a) {
  const double lo = a.at("min").get<double>(), hi = a.at("max").get<double>();
  if (!(hi > lo)) throw ConfigError("axis needs max > min");
  return uniform_grid(lo, hi, a.at("n").get<std::size_t>());
}

TreeModel make_tree(const json& m) {
  const auto kind = m.at("kind").get<std::string>();
  if (kind == "symmetric") {
    return TreeModel::symmetric(m.at("periods").get<std::size_t>(), m.value("x0", 0.0), m.value("dx", 1.0),
                                m.value("dt", 1.0), m.value("up", 0.5));
  }
  if (kind == "explicit") {
    json t{{"times", m.at("times")}, {"states", m.at("states")}, {"up_prob", m.at("up_prob")}};
    try {
      return io::tree_from_json(t.dump());
    } catch (const DomainError& e) {
      throw ConfigError(std::string("tree: ") + e.what());
    }
  }
  return lattice_from_diffusion(make_diffusion(m.at("diffusion")), m.at("periods").get<std::size_t>());
}

// Density of the original process through the Lamperti map of a unit-sigma field.
class LampertiDensity : public DensityModel {
 public:
  LampertiDensity(LampertiTransform lt, DensityField hat) : lt_(std::move(lt)), hat_(std::move(hat)) {}
  double rho(double t, double x) const override { return lt_.rho_from_hat(hat_, t, x); }
  Prob survival(double t, double x) const override { return lt_.survival_from_hat(hat_, t, x); }
  std::pair<double, double> reliable_range(double t) const override {
    const auto [a, b] = hat_.reliable_range(t);
    return {lt_.psi_inv(t, a), lt_.psi_inv(t, b)};
  }
  const DensityField& hat() const { return hat_; }

 private:
  LampertiTransform lt_;
  DensityField hat_;
};

std::vector<double> fp_x_grid(const DiffusionSpec& spec, double lo, double hi) {
  const double pad = 6.0 * std::sqrt(spec.T) + std::abs(spec.constant_drift.value_or(0.0)) * spec.T;
  lo = std::min(lo, spec.x0) - pad;
  hi = std::max(hi, spec.x0) + pad;
  const auto n = static_cast<std::size_t>(std::clamp((hi - lo) / 0.01, 401.0, 4001.0)) | 1u;
  return uniform_grid(lo, hi, n);
}

std::vector<double> fp_t_grid(const std::vector<double>& t, double t0) {
  std::vector<double> out{t0};
  for (double v : t) {
    if (v > t0 * (1.0 + 1e-12)) out.push_back(v);
  }
  return out;
}

bool wang_closed_form(const DiffusionSpec& spec, const DistortionSpec& d, double* alpha) {
  const auto* w = std::get_if<DistortionSpec::Wang>(&d.family());
  if (!w || !spec.constant_drift || !spec.unit_sigma()) return false;
  *alpha = w->alpha;
  return true;
}

}  // namespace

// ---------------------------------------------------------------- tree

RunReport cmd_tree(const json& config, const RunContext& ctx) {
  RunReport rr;
  json& rep = rr.report;
  rep["command"] = "tree";
  rep["config"] = config;
  rep["seed"] = ctx.seed;
  const json& tc = config.at("tree");

  if (tc.at("mode") == "crossing") {
    if (!tc.contains("crossing")) throw ConfigError("tree mode \"crossing\" needs a \"crossing\" section");
    const json& c = tc.at("crossing");
    Phase ph(rr, "crossing");
    const double r = crossing_tree_residual(c.at("p1").get<double>(), c.at("p2").get<double>(),
                                            make_distortion(c.at("distortion1")), make_distortion(c.at("distortion2")),
                                            c.value("t1", 1.0), c.value("t2", 2.0));
    const bool excluded = std::abs(r) > 1e-12;
    rep["results"] = {{"residual", r}, {"verdict", excluded ? "no consistent Phi" : "consistent Phi not excluded"}};
    return rr;
  }

  if (!tc.contains("model") || !tc.contains("payoff")) throw ConfigError("tree mode \"consistent\" needs model and payoff");
  TreeModel tree;
  DistortionSpec d = tc.contains("distortion") ? make_distortion(tc.at("distortion")) : DistortionSpec::identity();
  std::vector<double> g;
  {
    Phase ph(rr, "model");
    tree = make_tree(tc.at("model"));
    const std::size_t N = tree.periods();
    if (tc.at("payoff").is_array()) {
      g = tc.at("payoff").get<std::vector<double>>();
      if (g.size() != N + 1) {
        throw ConfigError("payoff has " + std::to_string(g.size()) + " values but the tree has " + std::to_string(N + 1) +
                          " terminal states");
      }
    } else {
      const auto f = make_payoff(tc.at("payoff"));
      for (std::size_t j = 0; j <= N; ++j) g.push_back(f(tree.state(N, j)));
    }
    for (std::size_t j = 1; j < g.size(); ++j) {
      if (g[j] < g[j - 1]) throw ConfigError("payoff must be nondecreasing in the terminal state");
    }
  }
  const std::size_t N = tree.periods();
  const bool strict = tc.value("strict_mon2", false);

  DistortedTree dt;
  {
    Phase ph(rr, "distort");
    dt = distort_tree(tree, d, strict ? Mon2Mode::Strict : Mon2Mode::Permissive);
  }
  json res;
  {
    Phase ph(rr, "expectations");
    const double consistent = backward_induction(dt, g, N)(0, 0);
    const double stat = static_expectation(tree, d, g);
    res["consistent"] = consistent;
    res["static"] = stat;
    res["consistent_minus_static"] = consistent - stat;
    if (tc.value("compare_naive", true)) {
      const double naive = naive_nested_expectation(tree, d, g);
      res["naive"] = naive;
      res["naive_gap"] = naive - stat;
    }
  }

  json ver;
  double tower = 0.0;
  const double qflow = [&] {
    Phase ph(rr, "qflow");
    return verify_initial_consistency(dt);
  }();
  ver["qflow_max_error"] = qflow;
  if (tc.value("tower_check", N <= 64) && N >= 2) {
    Phase ph(rr, "tower");
    std::vector<std::size_t> mids;
    if (N <= 16) {
      for (std::size_t s = 1; s < N; ++s) mids.push_back(s);
    } else {
      for (std::size_t k = 1; k <= 7; ++k) mids.push_back(std::max<std::size_t>(1, k * N / 8));
    }
    std::size_t triples = 0;
    for (std::size_t s : mids) {
      const std::size_t r_hi = N <= 16 ? s : 1;
      for (std::size_t r = 0; r < r_hi; ++r) {
        tower = std::max(tower, verify_tower(dt, g, r, s, N).max_discrepancy);
        ++triples;
      }
    }
    ver["tower_max_discrepancy"] = tower;
    ver["tower_triples"] = triples;
  }
  json mon2;
  mon2["violations"] = dt.violations().size();
  mon2["degenerate_edges"] = dt.degenerate_edges();
  mon2["strict"] = strict;
  json first = json::array();
  for (std::size_t k = 0; k < std::min<std::size_t>(20, dt.violations().size()); ++k) {
    const auto& v = dt.violations()[k];
    first.push_back({{"i", v.i}, {"j", v.j}, {"q_raw", v.q_raw}});
  }
  mon2["first"] = first;
  ver["mon2"] = mon2;
  const bool ok = dt.violations().empty() ? (qflow <= 1e-10 && tower <= 1e-10) : true;
  ver["verdict"] = dt.violations().empty() ? (ok ? "time-consistent" : "consistency check failed")
                                           : "mon2 violated; q clamped";
  if (!ok) rr.exit_code = static_cast<int>(ExitCode::Consistency);

  rep["tree"] = {{"periods", N}, {"distortion", json::parse(io::distortion_to_json(d))}};
  rep["results"] = res;
  rep["verification"] = ver;

  json files = json::array();
  if (N <= 1000) {
    Phase ph(rr, "write");
    auto f = csv(ctx.out / "tree_nodes.csv");
    f << "i,j,t,x,p_up,G,G_comp,q_up,mon2_ok\n";
    for (std::size_t i = 0; i <= N; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        const Prob G = dt.survival(i, j);
        f << i << ',' << j << ',' << format_double(tree.time(i)) << ',' << format_double(tree.state(i, j)) << ','
          << (i < N ? format_double(tree.up(i, j)) : "") << ',' << format_double(G.p) << ',' << format_double(G.comp)
          << ',' << (i < N ? format_double(dt.q_up(i, j)) : "") << ',' << (i < N ? (dt.mon2_ok(i, j) ? "1" : "0") : "")
          << '\n';
      }
    }
    files.push_back("tree_nodes.csv");
  }
  if (tc.value("phi_tables", N <= 20)) {
    Phase ph(rr, "phi_tables");
    auto f = csv(ctx.out / "phi_nodes.csv");
    f << "i,j,n,k,p_survival,q_survival\n";
    json nodes = json::array();
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        const auto tab = phi_at_node(dt, i, j, N);
        json rows = json::array();
        for (std::size_t k = 0; k <= N; ++k) {
          const Prob p = tab.p_survival()[k], q = tab.q_survival()[k];
          f << i << ',' << j << ',' << N << ',' << k << ',' << format_double(p.p) << ',' << format_double(q.p) << '\n';
          rows.push_back({p.p, q.p});
        }
        if (N <= 4) nodes.push_back({{"i", i}, {"j", j}, {"pairs", rows}});
      }
    }
    if (N <= 4) rep["phi_nodes"] = nodes;
    files.push_back("phi_nodes.csv");
  }
  rep["files"] = files;
  return rr;
}

// ---------------------------------------------------------------- dynamics

RunReport cmd_dynamics(const json& config, const RunContext& ctx) {
  RunReport rr;
  json& rep = rr.report;
  rep["command"] = "dynamics";
  rep["config"] = config;
  rep["seed"] = ctx.seed;
  const json& dc = config.at("dynamics");
  const DiffusionSpec spec = make_diffusion(dc.at("diffusion"));
  const DistortionSpec d = make_distortion(dc.at("distortion"));
  const double T = spec.T;
  const bool const_sigma = spec.constant_sigma.has_value();
  const double sig = spec.constant_sigma.value_or(1.0);
  json files = json::array();

  const json dens_cfg = dc.value("density", json{{"method", spec.gaussian() ? "closed_form" : "fokker_planck"}});
  const auto method = dens_cfg.at("method").get<std::string>();
  std::vector<double> tg, xg;
  if (dc.contains("drift_grid")) {
    tg = axis(dc.at("drift_grid").at("t"));
    xg = axis(dc.at("drift_grid").at("x"));
  } else {
    tg = uniform_grid(0.1 * T, T, 19);
    xg = uniform_grid(spec.x0 - 4.0 * sig * std::sqrt(T), spec.x0 + 4.0 * sig * std::sqrt(T), 81);
  }
  if (tg.front() <= 0.0 || tg.back() > T * (1.0 + 1e-12)) throw ConfigError("drift grid times must lie in (0, T]");

  std::unique_ptr<DensityModel> density;
  const DensityField* field = nullptr;
  json dens_rep{{"method", method}};
  {
    Phase ph(rr, "density");
    if (method == "closed_form") {
      if (!spec.gaussian()) throw ConfigError("closed_form density needs constant or Ornstein-Uhlenbeck drift with constant sigma");
      density = std::make_unique<GaussianDensity>(spec);
    } else if (method == "fokker_planck") {
      SurvivalPdeOptions so;
      so.steps = dens_cfg.value("steps", so.steps);
      const double t0 = std::min(0.01 * T, 0.5 * tg.front());
      if (spec.unit_sigma()) {
        auto f = std::make_unique<DensityField>(
            solve_survival_pde(spec, fp_t_grid(tg, t0), fp_x_grid(spec, xg.front(), xg.back()), so));
        dens_rep["projection"] = f->diagnostics.projection;
        dens_rep["boundary_leak"] = f->diagnostics.boundary_leak;
        dens_rep["mass_error"] = f->diagnostics.mass_error;
        density = std::move(f);
      } else {
        auto lt = lamperti_transform(spec);
        const double lo = lt.psi(tg.front(), xg.front()), hi = lt.psi(tg.front(), xg.back());
        auto hat = solve_survival_pde(lt.transformed, fp_t_grid(tg, t0), fp_x_grid(lt.transformed, lo, hi), so);
        dens_rep["lamperti"] = true;
        dens_rep["projection"] = hat.diagnostics.projection;
        density = std::make_unique<LampertiDensity>(std::move(lt), std::move(hat));
      }
    } else {
      if (!spec.unit_sigma()) throw ConfigError("bridge density needs unit sigma");
      BridgeOptions bo;
      bo.paths = dens_cfg.value("paths", bo.paths);
      bo.steps = dens_cfg.value("steps", bo.steps);
      bo.seed = ctx.seed;
      bo.threads = ctx.threads;
      auto f = std::make_unique<DensityField>(bridge_field(spec, tg, xg, bo));
      double se = 0.0;
      for (double v : f->rho_se) se = std::max(se, v);
      dens_rep["paths"] = bo.paths;
      dens_rep["max_rho_std_error"] = se;
      field = f.get();
      density = std::move(f);
    }
  }
  rep["density"] = dens_rep;

  DriftField mu;
  {
    Phase ph(rr, "drift");
    if (field) {
      mu = compute_mu(d, *field, spec.drift, sig);
    } else if (const_sigma) {
      mu = compute_mu(d, *density, spec.drift, tg, xg, sig);
    } else {
      mu = general_sigma_mu(d, *density, spec, spec.sigma, spec.sigma_dx, tg, xg);
    }
    io::write_drift_csv(ctx.out / "mu.csv", mu);
    files.push_back("mu.csv");
  }
  json mu_rep{{"provenance", mu.provenance},
              {"untrusted", mu.untrusted},
              {"growth_constant", mu.growth_constant()},
              {"min", *std::min_element(mu.mu.begin(), mu.mu.end())},
              {"max", *std::max_element(mu.mu.begin(), mu.mu.end())},
              {"t", {tg.front(), tg.back(), tg.size()}},
              {"x", {xg.front(), xg.back(), xg.size()}}};
  double alpha = 0.0;
  if (wang_closed_form(spec, d, &alpha)) {
    double err = 0.0;
    for (std::size_t i = 0; i < tg.size(); ++i) {
      for (std::size_t j = 0; j < xg.size(); ++j) {
        err = std::max(err, std::abs(mu.at(i, j) - (*spec.constant_drift + alpha / (2.0 * std::sqrt(tg[i])))));
      }
    }
    mu_rep["closed_form"] = "b + alpha/(2 sqrt(t))";
    mu_rep["closed_form_error"] = err;
  }
  rep["mu"] = mu_rep;

  std::optional<DistortedDrift> pointwise;
  if (const_sigma && (dc.contains("pde") || dc.contains("monte_carlo"))) {
    DriftOptions dopt;
    dopt.sigma = sig;
    pointwise.emplace(d, *density, spec.drift, dopt);
  }

  if (dc.contains("phi")) {
    Phase ph(rr, "phi");
    const json& pc = dc.at("phi");
    std::vector<double> pg;
    if (pc.contains("p")) {
      pg = pc.at("p").get<std::vector<double>>();
    } else {
      for (int i = 1; i <= 19; ++i) pg.push_back(0.05 * i);
    }
    PhiOptions po;
    if (pc.contains("nx")) po.grid.nx = pc.at("nx").get<std::size_t>();
    const double s = pc.at("s").get<double>(), t = pc.at("t").get<double>(), x = pc.value("x", spec.x0);
    if (!(s < t) || t > T * (1.0 + 1e-12)) throw ConfigError("phi needs 0 < s < t <= T");
    const auto curve = build_phi_curve(d, spec, *density, s, t, x, pg, po);
    io::write_phi_csv(ctx.out / "phi.csv", curve);
    {
      std::ofstream meta(ctx.out / "phi_meta.json");
      meta << io::phi_metadata_json(curve, d) << '\n';
    }
    files.push_back("phi.csv");
    files.push_back("phi_meta.json");
    json pr{{"s", s}, {"t", t}, {"x", x}, {"method", curve.method}, {"increasing", curve.increasing},
            {"p", curve.p}, {"phi", curve.phi}};
    if (d.is_identity()) {
      double e = 0.0;
      for (std::size_t i = 0; i < curve.p.size(); ++i) e = std::max(e, std::abs(curve.phi[i] - curve.p[i]));
      pr["identity_error"] = e;
    } else if (wang_closed_form(spec, d, &alpha)) {
      const double shift = alpha * (std::sqrt(t) - std::sqrt(s)) / std::sqrt(t - s);
      double e = 0.0;
      for (std::size_t i = 0; i < curve.p.size(); ++i) {
        if (curve.p[i] <= 0.0 || curve.p[i] >= 1.0) continue;
        e = std::max(e, std::abs(curve.phi[i] - normal::cdf(normal::quantile(curve.p[i]) + shift)));
      }
      pr["closed_form_error"] = e;
    }
    rep["phi"] = pr;
  }

  std::optional<PDESolution> sol;
  std::function<double(double)> g;
  if (dc.contains("pde")) {
    if (!pointwise) throw ConfigError("pde needs constant sigma");
    Phase ph(rr, "pde");
    const json& pc = dc.at("pde");
    g = make_payoff(pc.at("payoff"));
    PdeGrid grid;
    grid.center = spec.x0;
    if (pc.contains("x_lo")) grid.x_lo = pc.at("x_lo").get<double>();
    if (pc.contains("x_hi")) grid.x_hi = pc.at("x_hi").get<double>();
    grid.nx = pc.value("nx", grid.nx);
    grid.steps = pc.value("steps", grid.steps);
    if (dc.contains("monte_carlo")) {
      for (const auto& p : dc.at("monte_carlo").at("probes")) grid.include.push_back(p.at(0).get<double>());
    }
    const double s_min = pc.at("s_min").get<double>();
    if (!(s_min < T)) throw ConfigError("pde s_min must be below T");
    const double reach = 12.0 * sig * std::sqrt(T) + 1.0;
    const double lo = std::isnan(grid.x_lo) ? spec.x0 - reach : grid.x_lo - 1.0;
    const double hi = std::isnan(grid.x_hi) ? spec.x0 + reach : grid.x_hi + 1.0;
    sol = solve_distorted_pde(DriftFn(std::cref(*pointwise)),
                              MonotoneGrid::sample(g, uniform_grid(lo, hi, 4001), Direction::Increasing), s_min, T,
                              grid, sig);
    const std::size_t stride = pc.value("csv_stride", std::size_t{1});
    auto f = csv(ctx.out / "pde.csv");
    f << "s,x,u\n";
    for (std::size_t is = 0; is < sol->s_grid.size(); ++is) {
      if (is % stride != 0 && is + 1 != sol->s_grid.size()) continue;
      const auto u = sol->slice(is);
      for (std::size_t ix = 0; ix < u.size(); ix += stride) {
        f << format_double(sol->s_grid[is]) << ',' << format_double(sol->x_grid[ix]) << ',' << format_double(u[ix])
          << '\n';
      }
    }
    files.push_back("pde.csv");
    rep["pde"] = {{"s_min", s_min},
                  {"u_at_s_min_x0", sol->eval(s_min, spec.x0)},
                  {"boundary_gradient", sol->boundary_gradient},
                  {"projection", sol->projection},
                  {"s_nodes", sol->s_grid.size()},
                  {"x_nodes", sol->x_grid.size()}};
  }

  if (dc.contains("monte_carlo")) {
    if (!sol) throw ConfigError("monte_carlo needs a pde section to compare against");
    Phase ph(rr, "monte_carlo");
    const json& mc = dc.at("monte_carlo");
    auto f = csv(ctx.out / "mc_vs_pde.csv");
    f << "s,x,u_pde,mc_mean,mc_std_error,delta,tolerance\n";
    json rows = json::array();
    double worst = 0.0;
    std::uint32_t stream = 0;
    for (const auto& p : mc.at("probes")) {
      const double s = p.at(0).get<double>(), x = p.at(1).get<double>();
      if (s < sol->s_grid.front() || s >= T) throw ConfigError("monte_carlo probe time must lie in [s_min, T)");
      QSimOptions q;
      q.paths = mc.value("paths", q.paths);
      q.steps = mc.value("steps", q.steps);
      q.seed = ctx.seed;
      q.stream = stream++;
      q.threads = ctx.threads;
      q.sigma = sig;
      const auto r = simulate_q_dynamics(DriftFn(std::cref(*pointwise)), g, s, x, T, q);
      const double u = sol->eval(s, x), tol = 3.0 * r.std_error + 1e-3;
      worst = std::max(worst, std::abs(u - r.mean) / tol);
      f << format_double(s) << ',' << format_double(x) << ',' << format_double(u) << ',' << format_double(r.mean) << ','
        << format_double(r.std_error) << ',' << format_double(u - r.mean) << ',' << format_double(tol) << '\n';
      rows.push_back({{"s", s}, {"x", x}, {"u_pde", u}, {"mc_mean", r.mean}, {"mc_std_error", r.std_error},
                      {"delta", u - r.mean}});
    }
    files.push_back("mc_vs_pde.csv");
    rep["monte_carlo"] = {{"probes", rows}, {"max_delta_over_tolerance", worst}, {"within_tolerance", worst <= 1.0}};
  }

  if (dc.contains("convergence")) {
    if (!spec.unit_sigma()) throw ConfigError("convergence study needs unit sigma");
    Phase ph(rr, "convergence");
    const json& cc = dc.at("convergence");
    const auto tab = convergence_study(spec, d, make_payoff(cc.at("payoff")), cc.at("N").get<std::vector<std::size_t>>(),
                                       cc.at("t").get<double>(), cc.value("x", spec.x0));
    auto f = csv(ctx.out / "convergence.csv");
    f << "N,value,error,survival_error,skipped,mon2_violations\n";
    json rows = json::array();
    for (const auto& r : tab.rows) {
      f << r.N << ',' << format_double(r.value) << ',' << format_double(r.error) << ',' << format_double(r.survival_error)
        << ',' << (r.skipped ? 1 : 0) << ',' << r.mon2_violations << '\n';
      rows.push_back({{"N", r.N}, {"value", r.value}, {"error", r.error}, {"survival_error", r.survival_error},
                      {"skipped", r.skipped}, {"mon2_violations", r.mon2_violations}});
    }
    files.push_back("convergence.csv");
    rep["convergence"] = {{"t", tab.t},         {"x", tab.x},
                          {"reference", tab.reference}, {"reference_method", tab.reference_method},
                          {"rows", rows},       {"order", tab.order},
                          {"monotone", tab.monotone}};
  }
  rep["files"] = files;
  return rr;
}

// ---------------------------------------------------------------- density

RunReport cmd_density(const json& config, const RunContext& ctx) {
  RunReport rr;
  json& rep = rr.report;
  rep["command"] = "density";
  rep["config"] = config;
  rep["seed"] = ctx.seed;
  const json& dc = config.at("density");
  const DiffusionSpec spec = make_diffusion(dc.at("diffusion"));
  auto tg = dc.at("t").get<std::vector<double>>();
  std::sort(tg.begin(), tg.end());
  tg.erase(std::unique(tg.begin(), tg.end()), tg.end());
  if (tg.front() <= 0.0 || tg.back() > spec.T * (1.0 + 1e-12)) throw ConfigError("density times must lie in (0, T]");
  const auto xg = axis(dc.at("x"));

  std::vector<std::string> methods;
  if (dc.contains("methods")) {
    methods = dc.at("methods").get<std::vector<std::string>>();
  } else {
    if (spec.gaussian()) methods.push_back("closed_form");
    if (spec.unit_sigma()) {
      methods.push_back("fokker_planck");
      methods.push_back("bridge");
    }
  }
  if (methods.empty()) throw ConfigError("no density method applies to this diffusion");

  std::vector<std::pair<std::string, DensityField>> fields;
  json mrep;
  for (const auto& m : methods) {
    Phase ph(rr, m);
    if (m == "closed_form") {
      if (!spec.gaussian()) throw ConfigError("closed_form density needs a Gaussian diffusion");
      fields.emplace_back(m, gaussian_field(spec, tg, xg));
      mrep[m] = json::object();
    } else if (m == "fokker_planck") {
      if (!spec.unit_sigma()) throw ConfigError("fokker_planck density needs unit sigma");
      const json fc = dc.value("fokker_planck", json::object());
      const double t0 = fc.value("t0", std::min(0.01 * spec.T, 0.5 * tg.front()));
      const auto fx = fc.contains("x") ? axis(fc.at("x")) : fp_x_grid(spec, xg.front(), xg.back());
      SurvivalPdeOptions so;
      so.steps = fc.value("steps", so.steps);
      const auto fp = solve_survival_pde(spec, fp_t_grid(tg, t0), fx, so);
      std::vector<double> rho;
      std::vector<Prob> G;
      for (double t : tg) {
        for (double x : xg) {
          rho.push_back(fp.rho(t, x));
          G.push_back(fp.survival(t, x));
        }
      }
      DensityField f(tg, xg, std::move(rho), std::move(G), fp.reliable_tail());
      f.method = "fokker_planck";
      fields.emplace_back(m, std::move(f));
      mrep[m] = {{"projection", fp.diagnostics.projection},
                 {"boundary_leak", fp.diagnostics.boundary_leak},
                 {"mass_error", fp.diagnostics.mass_error},
                 {"x_nodes", fx.size()},
                 {"t0", t0}};
    } else {
      if (!spec.unit_sigma()) throw ConfigError("bridge density needs unit sigma");
      const json bc = dc.value("bridge", json::object());
      BridgeOptions bo;
      bo.paths = bc.value("paths", bo.paths);
      bo.steps = bc.value("steps", bo.steps);
      bo.seed = ctx.seed;
      bo.threads = ctx.threads;
      fields.emplace_back(m, bridge_field(spec, tg, xg, bo));
      const auto& se = fields.back().second.rho_se;
      mrep[m] = {{"paths", bo.paths}, {"steps", bo.steps}, {"max_rho_std_error", *std::max_element(se.begin(), se.end())}};
    }
  }
  rep["methods"] = mrep;

  json files = json::array();
  {
    Phase ph(rr, "write");
    for (const auto& [m, f] : fields) {
      io::write_field_csv(ctx.out / ("density_" + m + ".csv"), f);
      files.push_back("density_" + m + ".csv");
      if (dc.value("binary", false)) {
        io::write_field_binary(ctx.out / ("density_" + m + ".bin"), f);
        files.push_back("density_" + m + ".bin");
      }
    }
  }

  auto se_at = [](const DensityField& f, std::size_t k) { return f.rho_se.empty() ? 0.0 : f.rho_se[k]; };
  json pairs = json::array();
  bool all_ok = true;
  for (std::size_t a = 0; a < fields.size(); ++a) {
    for (std::size_t b = a + 1; b < fields.size(); ++b) {
      const auto& fa = fields[a].second;
      const auto& fb = fields[b].second;
      double gap = 0.0, ratio = 0.0;
      for (std::size_t it = 0; it < tg.size(); ++it) {
        for (std::size_t ix = 0; ix < xg.size(); ++ix) {
          const std::size_t k = it * xg.size() + ix;
          const double diff = std::abs(fa.rho_at(it, ix) - fb.rho_at(it, ix));
          const double se = std::hypot(se_at(fa, k), se_at(fb, k));
          gap = std::max(gap, diff);
          ratio = std::max(ratio, diff / std::max(1e-3, 3.0 * se));
        }
      }
      pairs.push_back({{"a", fields[a].first}, {"b", fields[b].first}, {"max_abs_diff", gap},
                       {"max_diff_over_tolerance", ratio}, {"agree", ratio <= 1.0}});
      all_ok = all_ok && ratio <= 1.0;
    }
  }
  rep["agreement"] = pairs;
  if (!all_ok) rr.exit_code = static_cast<int>(ExitCode::Numeric);

  const auto& ref = fields.front().second;
  const auto tail = tail_ratio_diagnostics(ref, tg.front());
  rep["tail_diagnostics"] = {{"field", fields.front().first},
                             {"max_log_slope", tail.max_log_slope},
                             {"min_ratio_factor", tail.min_ratio_factor},
                             {"max_ratio", tail.max_ratio},
                             {"implied_bound", tail.implied_bound},
                             {"cells", tail.cells}};
  rep["files"] = files;
  return rr;
}

}  // namespace distort::cli
