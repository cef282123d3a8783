#include "distort/choquet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "distort/error.hpp"

namespace distort {

DiscreteRV::DiscreteRV(std::vector<double> support, std::vector<double> probs)
    : support_(std::move(support)), probs_(std::move(probs)) {
  const std::size_t n = support_.size();
  if (n == 0 || probs_.size() != n) throw DomainError("discrete random variable needs matching non-empty support/probs");
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(support_[k])) throw DomainError("support values must be finite");
    if (k > 0 && !(support_[k] > support_[k - 1])) throw DomainError("support must be strictly increasing");
    if (!(probs_[k] > 0.0 && probs_[k] <= 1.0)) throw DomainError("probabilities must lie in (0,1]");
  }
  const double total = std::accumulate(probs_.begin(), probs_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("probabilities sum to " + std::to_string(total) + ", not 1");

  // upper tails from the right, lower cumulative sums from the left
  tails_.assign(n + 1, Prob{0.0, 1.0});
  double upper = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    upper += probs_[k];
    tails_[k].p = upper;
  }
  double lower = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    tails_[k].comp = lower;
    if (k < n) lower += probs_[k];
  }
  tails_[0] = {1.0, 0.0};
  tails_[n] = {0.0, 1.0};
}

DiscreteRV DiscreteRV::from_outcomes(const std::vector<double>& values, const std::vector<double>& probs) {
  if (values.size() != probs.size()) throw DomainError("outcome values and probabilities differ in length");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> xs, ps;
  for (auto i : idx) {
    if (!xs.empty() && values[i] == xs.back()) {
      ps.back() += probs[i];
    } else {
      xs.push_back(values[i]);
      ps.push_back(probs[i]);
    }
  }
  return DiscreteRV(std::move(xs), std::move(ps));
}

double DiscreteRV::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < size(); ++k) m += support_[k] * probs_[k];
  return m;
}

std::vector<double> distorted_pmf(const DiscreteRV& rv, const DistortionSpec& d, double t) {
  const auto& tails = rv.tails();
  std::vector<Prob> phi(tails.size());
  for (std::size_t k = 0; k < tails.size(); ++k) phi[k] = d.eval(t, tails[k]);
  std::vector<double> q(rv.size());
  for (std::size_t k = 0; k < rv.size(); ++k) q[k] = prob_diff(phi[k], phi[k + 1]);
  return q;
}

double choquet_expectation(const DiscreteRV& rv, const DistortionSpec& d, double t) {
  if (rv.support().front() < 0.0) throw DomainError("Choquet expectation needs a nonnegative random variable");
  const auto q = distorted_pmf(rv, d, t);
  double e = 0.0;
  for (std::size_t k = 0; k < rv.size(); ++k) e += rv.support()[k] * q[k];
  return e;
}

MonotoneGrid::MonotoneGrid(std::vector<double> x, std::vector<double> y, Direction dir)
    : x_(std::move(x)), y_(std::move(y)), dir_(dir) {
  if (x_.empty() || x_.size() != y_.size()) throw DomainError("monotone grid needs matching non-empty abscissae/ordinates");
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (!std::isfinite(x_[i]) || !std::isfinite(y_[i])) throw DomainError("monotone grid values must be finite");
    if (i == 0) continue;
    if (!(x_[i] > x_[i - 1])) throw DomainError("monotone grid abscissae must be strictly increasing");
    const bool ok = dir_ == Direction::Increasing ? y_[i] >= y_[i - 1] : y_[i] <= y_[i - 1];
    if (!ok) {
      throw DomainError(std::string("monotone grid ordinates are not ") +
                        (dir_ == Direction::Increasing ? "increasing" : "decreasing") + " at x = " +
                        std::to_string(x_[i]));
    }
  }
}

MonotoneGrid MonotoneGrid::sample(const std::function<double(double)>& f, const std::vector<double>& x,
                                  Direction dir) {
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), f);
  return MonotoneGrid(x, std::move(y), dir);
}

double MonotoneGrid::operator()(double x) const {
  if (x <= x_.front()) return y_.front();
  if (x >= x_.back()) return y_.back();
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - x_.begin());
  const double w = (x - x_[i - 1]) / (x_[i] - x_[i - 1]);
  return y_[i - 1] + w * (y_[i] - y_[i - 1]);
}

namespace {

struct Merged {
  std::vector<double> G;
  std::vector<double> g;
};

Merged merge(const MonotoneGrid& survival, const MonotoneGrid& g, std::size_t stride) {
  std::vector<double> xs(survival.x());
  xs.insert(xs.end(), g.x().begin(), g.x().end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  Merged m;
  const double s_lo = survival.x().front(), s_hi = survival.x().back();
  for (std::size_t i = 0; i < xs.size(); i += stride) {
    const double x = xs[i];
    m.G.push_back(x < s_lo ? 1.0 : (x > s_hi ? 0.0 : survival(x)));
    m.g.push_back(g(x));
  }
  if ((xs.size() - 1) % stride != 0) {
    const double x = xs.back();
    m.G.push_back(x > s_hi ? 0.0 : survival(x));
    m.g.push_back(g(x));
  }
  return m;
}

double by_parts(const Merged& m, const DistortionSpec& d, double t) {
  double e = m.g.front();
  double prev = d.eval(t, std::clamp(m.G.front(), 0.0, 1.0));
  for (std::size_t i = 0; i + 1 < m.G.size(); ++i) {
    const double cur = d.eval(t, std::clamp(m.G[i + 1], 0.0, 1.0));
    e += 0.5 * (prev + cur) * (m.g[i + 1] - m.g[i]);
    prev = cur;
  }
  return e;
}

}  // namespace

DensityExpectation choquet_expectation_density(const MonotoneGrid& survival, const MonotoneGrid& g,
                                               const DistortionSpec& d, double t) {
  if (survival.direction() != Direction::Decreasing) throw DomainError("survival curve must be decreasing");
  if (g.direction() != Direction::Increasing) throw DomainError("payoff must be increasing");
  if (survival.front() > 1.0 + 1e-12 || survival.back() < -1e-12) throw DomainError("survival values must lie in [0,1]");
  if (g.front() < 0.0) throw DomainError("payoff must be nonnegative");

  const Merged m = merge(survival, g, 1);
  DensityExpectation out;
  out.value = by_parts(m, d, t);

  // Stieltjes form against the distorted density phi'(G) rho dx, midpoint in G.
  const std::size_t n = m.G.size();
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) phi[i] = d.eval(t, std::clamp(m.G[i], 0.0, 1.0));
  double s = m.g.front() * (1.0 - phi.front()) + m.g.back() * phi.back();
  double bound = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dG = m.G[i] - m.G[i + 1];
    const double dPhi = phi[i] - phi[i + 1];
    const double gbar = 0.5 * (m.g[i] + m.g[i + 1]);
    double w = 0.0;
    if (dG > 0.0) w = d.derivatives(t, std::clamp(0.5 * (m.G[i] + m.G[i + 1]), 0.0, 1.0)).dp * dG;
    s += gbar * w;
    bound += std::abs(m.g[i + 1] - m.g[i]) * std::abs(dPhi) + std::abs(gbar) * std::abs(dPhi - w);
  }
  out.stieltjes = s;
  out.agreement_bound = 2.0 * bound + 1e-12;
  if (!(std::abs(out.value - out.stieltjes) <= out.agreement_bound)) {
    throw NumericError("density Choquet forms disagree: " + std::to_string(out.value) + " vs " +
                       std::to_string(out.stieltjes));
  }
  if (n >= 5) out.richardson = (out.value - by_parts(merge(survival, g, 2), d, t)) / 3.0;
  return out;
}

MonotonicityReport monotonicity_suite(const DistortionSpec& d, double t, const std::vector<double>& constants,
                                      const std::vector<ScaledCase>& scalings,
                                      const std::vector<DominatedPair>& pairs, double tol) {
  MonotonicityReport r;
  auto record = [&](bool ok, double err) {
    ++r.checks;
    if (!ok) ++r.failures;
    r.max_error = std::max(r.max_error, err);
  };
  for (double c : constants) {
    const double e = choquet_expectation(DiscreteRV({c}, {1.0}), d, t);
    record(std::abs(e - c) <= tol, std::abs(e - c));
  }
  for (const auto& sc : scalings) {
    std::vector<double> scaled(sc.rv.support());
    for (auto& v : scaled) v *= sc.c;
    const double lhs = choquet_expectation(DiscreteRV::from_outcomes(scaled, sc.rv.probs()), d, t);
    const double rhs = sc.c * choquet_expectation(sc.rv, d, t);
    const double err = std::abs(lhs - rhs);
    record(err <= tol * std::max(1.0, std::abs(rhs)), err);
  }
  for (const auto& pr : pairs) {
    const double lo = choquet_expectation(DiscreteRV::from_outcomes(pr.lower, pr.probs), d, t);
    const double hi = choquet_expectation(DiscreteRV::from_outcomes(pr.upper, pr.probs), d, t);
    record(lo <= hi + tol, std::max(0.0, lo - hi));
  }
  return r;
}

}  // namespace distort
