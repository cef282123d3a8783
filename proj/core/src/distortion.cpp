#include "distort/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "distort/error.hpp"
#include "distort/normal.hpp"

namespace distort {

namespace {

struct PDerivs {
  double d1, d2, d3;
};

double log_p(Prob x) { return x.p <= 0.5 ? std::log(x.p) : std::log1p(-x.comp); }
double log_comp(Prob x) { return x.comp <= 0.5 ? std::log(x.comp) : std::log1p(-x.p); }

Prob from_log(double l) { return {std::exp(l), -std::expm1(l)}; }

// phi', phi'', phi''' from the derivatives of l = log(phi)
PDerivs from_log_derivs(double phi, double l1, double l2, double l3) {
  return {phi * l1, phi * (l2 + l1 * l1), phi * (l3 + 3.0 * l1 * l2 + l1 * l1 * l1)};
}

// ---- per-family kernels on the open interval ----

Prob value(const DistortionSpec::Identity&, Prob x) { return x; }
PDerivs derivs(const DistortionSpec::Identity&, Prob) { return {1.0, 0.0, 0.0}; }

Prob value(const DistortionSpec::Power& f, Prob x) {
  return {std::pow(x.p, f.gamma), -std::expm1(f.gamma * log_p(x))};
}
PDerivs derivs(const DistortionSpec::Power& f, Prob x) {
  const double g = f.gamma;
  return {g * std::pow(x.p, g - 1.0), g * (g - 1.0) * std::pow(x.p, g - 2.0),
          g * (g - 1.0) * (g - 2.0) * std::pow(x.p, g - 3.0)};
}

double kt_log(const DistortionSpec::KahnemanTversky& f, Prob x) {
  const double g = f.gamma;
  const double lp = log_p(x);
  // D - 1 = (p^g - 1) + q^g
  const double dm1 = std::expm1(g * lp) + std::pow(x.comp, g);
  return g * lp - std::log1p(dm1) / g;
}
Prob value(const DistortionSpec::KahnemanTversky& f, Prob x) { return from_log(kt_log(f, x)); }
PDerivs derivs(const DistortionSpec::KahnemanTversky& f, Prob x) {
  const double g = f.gamma;
  const double p = x.p, q = x.comp;
  const double D = std::pow(p, g) + std::pow(q, g);
  const double D1 = g * (std::pow(p, g - 1.0) - std::pow(q, g - 1.0));
  const double D2 = g * (g - 1.0) * (std::pow(p, g - 2.0) + std::pow(q, g - 2.0));
  const double D3 = g * (g - 1.0) * (g - 2.0) * (std::pow(p, g - 3.0) - std::pow(q, g - 3.0));
  const double r1 = D1 / D, r2 = D2 / D, r3 = D3 / D;
  const double l1 = g / p - r1 / g;
  const double l2 = -g / (p * p) - (r2 - r1 * r1) / g;
  const double l3 = 2.0 * g / (p * p * p) - (r3 - 3.0 * r1 * r2 + 2.0 * r1 * r1 * r1) / g;
  return from_log_derivs(std::exp(kt_log(f, x)), l1, l2, l3);
}

double tf_z(const DistortionSpec::TverskyFox& f, Prob x) {
  return std::log(f.alpha) + f.gamma * (log_p(x) - log_comp(x));
}
double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
Prob value(const DistortionSpec::TverskyFox& f, Prob x) {
  const double z = tf_z(f, x);
  return {logistic(z), logistic(-z)};
}
PDerivs derivs(const DistortionSpec::TverskyFox& f, Prob x) {
  const double g = f.gamma;
  const double p = x.p, q = x.comp;
  const double z = tf_z(f, x);
  const double s = logistic(z), sc = logistic(-z);
  const double s1 = s * sc;
  const double s2 = s1 * (sc - s);
  const double s3 = s1 * (1.0 - 6.0 * s * sc);
  const double z1 = g / (p * q);
  const double z2 = g * (1.0 / (q * q) - 1.0 / (p * p));
  const double z3 = 2.0 * g * (1.0 / (p * p * p) + 1.0 / (q * q * q));
  return {s1 * z1, s2 * z1 * z1 + s1 * z2, s3 * z1 * z1 * z1 + 3.0 * s2 * z1 * z2 + s1 * z3};
}

Prob value(const DistortionSpec::Prelec& f, Prob x) {
  const double L = -log_p(x);
  return from_log(-f.gamma * std::pow(L, f.alpha));
}
PDerivs derivs(const DistortionSpec::Prelec& f, Prob x) {
  const double g = f.gamma, a = f.alpha, p = x.p;
  const double L = -log_p(x);
  const double h1 = -g * a * std::pow(L, a - 1.0);
  const double h2 = -g * a * (a - 1.0) * std::pow(L, a - 2.0);
  const double h3 = -g * a * (a - 1.0) * (a - 2.0) * std::pow(L, a - 3.0);
  const double L1 = -1.0 / p, L2 = 1.0 / (p * p), L3 = -2.0 / (p * p * p);
  const double l1 = h1 * L1;
  const double l2 = h2 * L1 * L1 + h1 * L2;
  const double l3 = h3 * L1 * L1 * L1 + 3.0 * h2 * L1 * L2 + h1 * L3;
  return from_log_derivs(std::exp(-g * std::pow(L, a)), l1, l2, l3);
}

double wang_z(Prob x) { return x.p <= 0.5 ? normal::quantile(x.p) : normal::quantile_upper(x.comp); }
Prob value(const DistortionSpec::Wang& f, Prob x) {
  const double z = wang_z(x) + f.alpha;
  return {normal::cdf(z), normal::sf(z)};
}
PDerivs derivs(const DistortionSpec::Wang& f, Prob x) {
  const double a = f.alpha;
  const double z = wang_z(x);
  const double d1 = std::exp(-a * z - 0.5 * a * a);
  const double fz = normal::pdf(z);
  return {d1, -a * d1 / fz, a * (a - z) * d1 / (fz * fz)};
}

// Separable needs the time argument; handled in the dispatchers below.

Prob interior_value(const DistortionSpec::Family& fam, double t, Prob x);
PDerivs interior_derivs(const DistortionSpec::Family& fam, Prob x, double t);

Prob separable_value(const DistortionSpec::Separable& s, double t, Prob x) {
  const double w = s.weight.value(t);
  const Prob b = interior_value(s.base->family(), t, x);
  return {(1.0 - w) * x.p + w * b.p, (1.0 - w) * x.comp + w * b.comp};
}

Prob interior_value(const DistortionSpec::Family& fam, double t, Prob x) {
  return std::visit(
      [&](const auto& f) -> Prob {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, DistortionSpec::Separable>) {
          return separable_value(f, t, x);
        } else {
          return value(f, x);
        }
      },
      fam);
}

PDerivs interior_derivs(const DistortionSpec::Family& fam, Prob x, double t) {
  return std::visit(
      [&](const auto& f) -> PDerivs {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, DistortionSpec::Separable>) {
          const double w = f.weight.value(t);
          const PDerivs b = interior_derivs(f.base->family(), x, t);
          return {(1.0 - w) + w * b.d1, w * b.d2, w * b.d3};
        } else {
          return derivs(f, x);
        }
      },
      fam);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw DomainError(msg);
}

bool finite(double v) { return std::isfinite(v); }

void check_time(const DistortionSpec::Family& fam, double t) {
  require(finite(t) && t >= 0.0, "distortion time must be finite and >= 0, got " + std::to_string(t));
  if (const auto* s = std::get_if<DistortionSpec::Separable>(&fam)) {
    require(t <= s->horizon * (1.0 + 1e-12),
            "time " + std::to_string(t) + " beyond separable horizon " + std::to_string(s->horizon));
  }
}

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError(std::string(what) + " must lie in [0,1], got " + std::to_string(p));
}

}  // namespace

double TimeWeight::value(double t) const {
  switch (kind) {
    case Kind::Constant: return a;
    case Kind::Linear: return a + b * t;
    case Kind::Exponential: return b + (a - b) * std::exp(-k * t);
  }
  return a;
}

double TimeWeight::slope(double t) const {
  switch (kind) {
    case Kind::Constant: return 0.0;
    case Kind::Linear: return b;
    case Kind::Exponential: return -k * (a - b) * std::exp(-k * t);
  }
  return 0.0;
}

DistortionSpec DistortionSpec::identity() { return DistortionSpec(Identity{}); }

DistortionSpec DistortionSpec::power(double gamma) {
  require(finite(gamma) && gamma > 0.0, "power distortion needs gamma > 0");
  return DistortionSpec(Power{gamma});
}

DistortionSpec DistortionSpec::kahneman_tversky(double gamma) {
  require(finite(gamma) && gamma >= kKahnemanTverskyFloor && gamma < 1.0,
          "Kahneman-Tversky distortion needs gamma in [0.28, 1), got " + std::to_string(gamma));
  return DistortionSpec(KahnemanTversky{gamma});
}

DistortionSpec DistortionSpec::tversky_fox(double alpha, double gamma) {
  require(finite(alpha) && alpha > 0.0, "Tversky-Fox distortion needs alpha > 0");
  require(finite(gamma) && gamma > 0.0 && gamma < 1.0, "Tversky-Fox distortion needs gamma in (0,1)");
  return DistortionSpec(TverskyFox{alpha, gamma});
}

DistortionSpec DistortionSpec::prelec(double gamma, double alpha) {
  require(finite(gamma) && gamma > 0.0, "Prelec distortion needs gamma > 0");
  require(finite(alpha) && alpha > 0.0 && alpha < 1.0, "Prelec distortion needs alpha in (0,1)");
  return DistortionSpec(Prelec{gamma, alpha});
}

DistortionSpec DistortionSpec::wang(double alpha) {
  require(finite(alpha), "Wang distortion needs a finite alpha");
  return DistortionSpec(Wang{alpha});
}

DistortionSpec DistortionSpec::separable(TimeWeight weight, const DistortionSpec& base, double horizon) {
  require(finite(horizon) && horizon > 0.0, "separable distortion needs a positive finite horizon");
  require(!std::holds_alternative<Separable>(base.family_), "separable distortion cannot wrap another separable one");
  require(finite(weight.a) && finite(weight.b) && finite(weight.k), "time weight parameters must be finite");
  if (weight.kind == TimeWeight::Kind::Exponential) require(weight.k >= 0.0, "exponential time weight needs k >= 0");
  // monotone in t: endpoints suffice
  for (double t : {0.0, horizon}) {
    const double w = weight.value(t);
    require(w >= 0.0 && w <= 1.0, "time weight must stay in [0,1] on [0, horizon]; w(" + std::to_string(t) +
                                      ") = " + std::to_string(w));
  }
  return DistortionSpec(Separable{weight, std::make_shared<const DistortionSpec>(base), horizon});
}

std::string_view DistortionSpec::name() const {
  static constexpr std::string_view names[] = {"identity", "power", "kahneman_tversky", "tversky_fox",
                                               "prelec",   "wang",  "separable"};
  return names[family_.index()];
}

bool DistortionSpec::time_invariant() const {
  if (const auto* s = std::get_if<Separable>(&family_)) {
    return s->weight.kind == TimeWeight::Kind::Constant || s->base->is_identity();
  }
  return true;
}

Prob DistortionSpec::eval(double t, Prob x) const {
  check_time(family_, t);
  check_prob(x.p, "probability");
  check_prob(x.comp, "complement probability");
  if (x.p == 0.0) return {0.0, 1.0};
  if (x.comp == 0.0) return {1.0, 0.0};
  return interior_value(family_, t, x);
}

double DistortionSpec::eval(double t, double p) const {
  check_prob(p, "probability");
  return eval(t, Prob::of(p)).p;
}

double DistortionSpec::eval_complement(double t, double c) const {
  check_prob(c, "complement probability");
  return eval(t, Prob::of_complement(c)).comp;
}

Derivatives DistortionSpec::derivatives(double t, double p) const {
  check_prob(p, "probability");
  return derivatives(t, Prob::of(p));
}

Derivatives DistortionSpec::derivatives(double t, Prob x) const {
  check_time(family_, t);
  check_prob(x.p, "probability");
  check_prob(x.comp, "complement probability");
  Derivatives out;
  if (x.p < kDerivativeClamp) {
    x = {kDerivativeClamp, 1.0 - kDerivativeClamp};
    out.clamped = true;
  } else if (x.comp < kDerivativeClamp) {
    x = {1.0 - kDerivativeClamp, kDerivativeClamp};
    out.clamped = true;
  }
  const PDerivs d = interior_derivs(family_, x, t);
  out.dp = d.d1;
  out.dpp = d.d2;
  out.dppp = d.d3;
  if (const auto* s = std::get_if<Separable>(&family_)) {
    const double ws = s->weight.slope(t);
    if (ws != 0.0) {
      const Prob b = interior_value(s->base->family(), t, x);
      out.dt = ws * (x.p <= 0.5 ? b.p - x.p : x.comp - b.comp);
      out.dtp = ws * (interior_derivs(s->base->family(), x, t).d1 - 1.0);
    }
  }
  return out;
}

ValidationReport validate_distortion(const DistortionSpec& d, const std::vector<double>& t_grid,
                                     const std::vector<double>& p_grid, double bound) {
  ValidationReport r;
  r.bound = bound;
  if (t_grid.empty() || p_grid.empty()) {
    r.pass = false;
    return r;
  }
  std::vector<double> ps(p_grid);
  std::sort(ps.begin(), ps.end());
  for (double t : t_grid) {
    r.endpoints = r.endpoints && d.eval(t, 0.0) == 0.0 && d.eval(t, 1.0) == 1.0;
    double prev = 0.0;
    for (double p : ps) {
      const double v = d.eval(t, p);
      if (!(v > prev)) r.monotone = false;
      prev = v;
      const Derivatives dv = d.derivatives(t, p);
      if (!(dv.dp > 0.0)) {
        r.positive_slope = false;
        continue;
      }
      const double pq = p * (1.0 - p);
      r.max_pp_ratio = std::max(r.max_pp_ratio, std::abs(dv.dpp / dv.dp) * pq);
      r.max_ppp_ratio = std::max(r.max_ppp_ratio, std::abs(dv.dppp / dv.dp) * pq * pq);
      r.max_t_ratio = std::max(r.max_t_ratio, std::abs(dv.dt / dv.dp) / pq);
      r.max_tp_ratio = std::max(r.max_tp_ratio, std::abs(dv.dtp / dv.dp));
    }
    if (!(1.0 > prev)) r.monotone = false;
  }
  r.pass = r.monotone && r.endpoints && r.positive_slope && r.max_pp_ratio <= bound && r.max_ppp_ratio <= bound &&
           r.max_t_ratio <= bound && r.max_tp_ratio <= bound;
  return r;
}

}  // namespace distort
