#include "distort/tree.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "distort/error.hpp"

namespace distort {

namespace {

std::string node_name(std::size_t i, std::size_t j) { return "(" + std::to_string(i) + "," + std::to_string(j) + ")"; }

// Survival pairs of an occupancy vector covering terminal indices [first, first + w.size()).
std::vector<Prob> survival_from_occupancy(const std::vector<double>& w, std::size_t first, std::size_t n) {
  std::vector<Prob> out(n + 1, Prob{1.0, 0.0});
  const std::size_t last = first + w.size();  // exclusive
  for (std::size_t k = last; k <= n; ++k) out[k] = {0.0, 1.0};
  double upper = 0.0;
  for (std::size_t m = w.size(); m-- > 1;) {
    upper += w[m];
    out[first + m].p = std::min(upper, 1.0);
  }
  double lower = 0.0;
  for (std::size_t m = 1; m < w.size(); ++m) {
    lower += w[m - 1];
    out[first + m].comp = std::min(lower, 1.0);
  }
  return out;
}

template <class Up>
std::vector<Prob> conditional_survival(std::size_t i, std::size_t j, std::size_t n, std::size_t N, Up up) {
  if (i >= n || n > N || j > i) {
    throw DomainError("invalid conditional survival indices i=" + std::to_string(i) + " j=" + std::to_string(j) +
                      " n=" + std::to_string(n));
  }
  std::vector<double> w{1.0};
  for (std::size_t l = i; l < n; ++l) {
    std::vector<double> next(w.size() + 1, 0.0);
    for (std::size_t m = 0; m < w.size(); ++m) {
      const double q = up(l, j + m);
      next[m] += w[m] * (1.0 - q);
      next[m + 1] += w[m] * q;
    }
    w.swap(next);
  }
  return survival_from_occupancy(w, j, n);
}

void require_increasing_payoff(std::span<const double> g) {
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!std::isfinite(g[k])) throw DomainError("payoff values must be finite");
    if (g[k] < 0.0) throw DomainError("payoff must be nonnegative");
    if (k > 0 && g[k] < g[k - 1]) throw DomainError("payoff must be increasing over terminal states, fails at k=" + std::to_string(k));
  }
}

}  // namespace

TreeModel::TreeModel(std::vector<double> times, Ragged<double> states, Ragged<double> up_prob)
    : times_(std::move(times)), states_(std::move(states)), up_(std::move(up_prob)) {
  validate();
}

void TreeModel::validate() const {
  if (times_.size() < 2) throw DomainError("tree needs at least one period");
  const std::size_t N = times_.size() - 1;
  if (times_[0] != 0.0) throw DomainError("tree times must start at 0");
  for (std::size_t i = 1; i <= N; ++i) {
    if (!(times_[i] > times_[i - 1]) || !std::isfinite(times_[i])) throw DomainError("tree times must be strictly increasing");
  }
  if (states_.levels() != N + 1) throw DomainError("tree needs N+1 state levels");
  if (up_.levels() != N) throw DomainError("tree needs N levels of up probabilities");
  for (std::size_t i = 0; i <= N; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      if (!std::isfinite(states_(i, j))) throw DomainError("state " + node_name(i, j) + " is not finite");
      if (j > 0 && !(states_(i, j) > states_(i, j - 1))) throw DomainError("states must be strictly sorted at " + node_name(i, j));
      if (i < N && !(up_(i, j) > 0.0 && up_(i, j) < 1.0)) throw DomainError("up probability at " + node_name(i, j) + " must lie in (0,1)");
    }
  }
}

TreeModel TreeModel::symmetric(std::size_t periods, double x0, double dx, double dt, double up) {
  if (periods == 0) throw DomainError("tree needs at least one period");
  std::vector<double> times(periods + 1);
  Ragged<double> states(periods + 1);
  Ragged<double> ups(periods, up);
  for (std::size_t i = 0; i <= periods; ++i) {
    times[i] = static_cast<double>(i) * dt;
    for (std::size_t j = 0; j <= i; ++j) states(i, j) = x0 + (2.0 * static_cast<double>(j) - static_cast<double>(i)) * dx;
  }
  return TreeModel(std::move(times), std::move(states), std::move(ups));
}

TreeModel TreeModel::with_up(std::size_t i, std::size_t j, double p) const {
  TreeModel t(*this);
  t.up_(i, j) = p;
  t.validate();
  return t;
}

TreeModel TreeModel::with_state(std::size_t i, std::size_t j, double x) const {
  TreeModel t(*this);
  t.states_(i, j) = x;
  t.validate();
  return t;
}

Ragged<Prob> survival_probabilities(const TreeModel& tree) {
  const std::size_t N = tree.periods();
  Ragged<Prob> G(N + 1);
  std::vector<double> pi{1.0};
  for (std::size_t i = 0;; ++i) {
    auto level = survival_from_occupancy(pi, 0, i);
    std::copy(level.begin(), level.end(), G.level(i).begin());
    G(i, 0) = {1.0, 0.0};
    if (i == N) break;
    std::vector<double> next(i + 2, 0.0);
    for (std::size_t j = 0; j <= i; ++j) {
      const double p = tree.up(i, j);
      next[j] += pi[j] * (1.0 - p);
      next[j + 1] += pi[j] * p;
    }
    pi.swap(next);
  }
  return G;
}

DistortedTree distort_tree(TreeModel tree, const DistortionSpec& schedule, Mon2Mode mode) {
  DistortedTree out;
  const std::size_t N = tree.periods();
  out.G_ = survival_probabilities(tree);
  out.q_ = Ragged<double>(N);
  out.ok_ = Ragged<unsigned char>(N, 1);

  // D(i,j) = phi_{t_i}(G_ij); phi_0 is the identity by convention
  Ragged<Prob> D(N + 1);
  for (std::size_t i = 0; i <= N; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      D(i, j) = i == 0 ? out.G_(i, j) : schedule.eval(tree.time(i), out.G_(i, j));
    }
  }
  // survival values this close to 0 or 1 carry no usable precision after distortion
  auto saturated = [](Prob x) { return x.smaller() < kDerivativeClamp; };

  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const bool top = j == i;
      const Prob D_next = top ? Prob{0.0, 1.0} : D(i, j + 1);
      const double num = prob_diff(D(i + 1, j + 1), D_next);
      const double den = prob_diff(D(i, j), D_next);
      const bool degenerate = den <= 0.0 || (j > 0 && saturated(out.G_(i, j))) ||
                              (!top && saturated(out.G_(i, j + 1))) || saturated(out.G_(i + 1, j + 1)) ||
                              (j > 0 && saturated(D(i, j))) || saturated(D(i + 1, j + 1)) ||
                              (!top && saturated(D_next));
      if (degenerate) {
        out.q_(i, j) = tree.up(i, j);
        ++out.degenerate_;
        continue;
      }
      const double q = num / den;
      if (num > 0.0 && num < den) {
        out.q_(i, j) = q;
        continue;
      }
      out.ok_(i, j) = 0;
      if (mode == Mon2Mode::Strict) {
        throw ConsistencyError("mon2 fails at node " + node_name(i, j) + ": distorted up probability " + std::to_string(q) +
                               " outside (0,1)");
      }
      out.violations_.push_back({i, j, q});
      out.q_(i, j) = std::clamp(q, kMon2Clamp, 1.0 - kMon2Clamp);
    }
  }
  out.base_ = std::move(tree);
  out.schedule_ = schedule;
  return out;
}

Ragged<double> backward_induction(const DistortedTree& dt, std::span<const double> g, std::size_t n) {
  if (n > dt.periods()) throw DomainError("induction horizon beyond tree");
  if (g.size() != n + 1) throw DomainError("payoff needs one value per state at level " + std::to_string(n));
  require_increasing_payoff(g);
  Ragged<double> u(n + 1);
  std::copy(g.begin(), g.end(), u.level(n).begin());
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double lo = u(i + 1, j), hi = u(i + 1, j + 1);
      u(i, j) = std::clamp(lo + dt.q_up(i, j) * (hi - lo), lo, hi);
      if (j > 0 && u(i, j) < u(i, j - 1)) {
        throw ConsistencyError("induction lost monotonicity at node " + node_name(i, j));
      }
    }
  }
  return u;
}

std::vector<Prob> q_conditional_survival(const DistortedTree& dt, std::size_t i, std::size_t j, std::size_t n) {
  return conditional_survival(i, j, n, dt.periods(), [&](std::size_t l, std::size_t m) { return dt.q_up(l, m); });
}

std::vector<Prob> p_conditional_survival(const TreeModel& tree, std::size_t i, std::size_t j, std::size_t n) {
  return conditional_survival(i, j, n, tree.periods(), [&](std::size_t l, std::size_t m) { return tree.up(l, m); });
}

NodePhiTable::NodePhiTable(std::size_t i, std::size_t j, std::size_t n, std::vector<Prob> p_surv,
                           std::vector<Prob> q_surv)
    : i_(i), j_(j), n_(n), p_(std::move(p_surv)), q_(std::move(q_surv)) {
  if (p_.size() != n + 1 || q_.size() != n + 1) throw DomainError("Phi table needs survival values over all terminal states");
  knots_p_.push_back(0.0);
  knots_q_.push_back(0.0);
  for (std::size_t k = n + 1; k-- > 0;) {
    const double p = p_[k].p, q = q_[k].p;
    if (p > knots_p_.back() && p < 1.0) {
      knots_p_.push_back(p);
      knots_q_.push_back(q);
    }
  }
  knots_p_.push_back(1.0);
  knots_q_.push_back(1.0);
}

double NodePhiTable::operator()(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("Phi argument must lie in [0,1]");
  const auto it = std::lower_bound(knots_p_.begin(), knots_p_.end(), p);
  const std::size_t k = static_cast<std::size_t>(it - knots_p_.begin());
  if (knots_p_[k] == p) return knots_q_[k];
  const double w = (p - knots_p_[k - 1]) / (knots_p_[k] - knots_p_[k - 1]);
  return knots_q_[k - 1] + w * (knots_q_[k] - knots_q_[k - 1]);
}

NodePhiTable phi_at_node(const DistortedTree& dt, std::size_t i, std::size_t j, std::size_t n) {
  return NodePhiTable(i, j, n, p_conditional_survival(dt.base(), i, j, n), q_conditional_survival(dt, i, j, n));
}

double choquet_at_node(const NodePhiTable& table, std::span<const double> g) {
  if (g.size() != table.n() + 1) throw DomainError("payoff needs one value per terminal state");
  // g_0 + sum_k (g_k - g_{k-1}) Phi(P(X_n >= x_nk))
  double e = g[0];
  for (std::size_t k = 1; k < g.size(); ++k) e += (g[k] - g[k - 1]) * table(table.p_survival()[k].p);
  return e;
}

TowerCheck verify_tower(const DistortedTree& dt, std::span<const double> g, std::size_t r, std::size_t s,
                        std::size_t t) {
  if (!(r < s && s < t && t <= dt.periods())) throw DomainError("tower check needs r < s < t <= N");
  TowerCheck out;
  const auto u = backward_induction(dt, g, t);
  out.induction.assign(u.level(r).begin(), u.level(r).end());
  std::vector<double> v(s + 1);
  for (std::size_t k = 0; k <= s; ++k) v[k] = choquet_at_node(phi_at_node(dt, s, k, t), g);
  for (std::size_t j = 0; j <= r; ++j) {
    out.direct.push_back(choquet_at_node(phi_at_node(dt, r, j, t), g));
    out.nested.push_back(choquet_at_node(phi_at_node(dt, r, j, s), v));
    const double a = out.induction[j], b = out.direct[j], c = out.nested[j];
    out.max_discrepancy = std::max({out.max_discrepancy, std::abs(a - b), std::abs(a - c), std::abs(b - c)});
  }
  return out;
}

double verify_initial_consistency(const DistortedTree& dt) {
  const std::size_t N = dt.periods();
  const auto& sched = dt.schedule();
  double worst = 0.0;
  std::vector<double> w{1.0};
  for (std::size_t n = 1; n <= N; ++n) {
    std::vector<double> next(n + 1, 0.0);
    for (std::size_t m = 0; m < w.size(); ++m) {
      const double q = dt.q_up(n - 1, m);
      next[m] += w[m] * (1.0 - q);
      next[m + 1] += w[m] * q;
    }
    w.swap(next);
    const auto Q = survival_from_occupancy(w, 0, n);
    for (std::size_t k = 1; k <= n; ++k) {
      const Prob phi = sched.eval(dt.base().time(n), dt.survival(n, k));
      worst = std::max(worst, std::abs(prob_diff(phi, Q[k])));
    }
  }
  return worst;
}

double naive_nested_expectation(const TreeModel& tree, const DistortionSpec& d, std::span<const double> g) {
  const std::size_t N = tree.periods();
  if (g.size() != N + 1) throw DomainError("payoff needs one value per terminal state");
  require_increasing_payoff(g);
  std::vector<double> v(g.begin(), g.end());
  for (std::size_t i = N; i-- > 0;) {
    const double h = tree.time(i + 1) - tree.time(i);
    for (std::size_t j = 0; j <= i; ++j) v[j] = v[j] + d.eval(h, tree.up(i, j)) * (v[j + 1] - v[j]);
    v.pop_back();
  }
  return v[0];
}

double static_expectation(const TreeModel& tree, const DistortionSpec& d, std::span<const double> g) {
  const std::size_t N = tree.periods();
  if (g.size() != N + 1) throw DomainError("payoff needs one value per terminal state");
  require_increasing_payoff(g);
  const auto G = survival_probabilities(tree);
  const double tN = tree.time(N);
  double e = g[0];
  for (std::size_t k = 1; k <= N; ++k) e += (g[k] - g[k - 1]) * d.eval(tN, G(N, k)).p;
  return e;
}

double crossing_tree_residual(double p1, double p2, const DistortionSpec& d1, const DistortionSpec& d2, double t1,
                              double t2) {
  if (!(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0)) throw DomainError("crossing tree probabilities must lie in (0,1)");
  const double rhs = d2.eval(t2, 0.5 * (1.0 + p2)) - d2.eval(t2, 0.5 * (1.0 - p1 + p2)) + d2.eval(t2, 0.5 * (1.0 - p1));
  return d1.eval(t1, 0.5) - rhs;
}

}  // namespace distort
