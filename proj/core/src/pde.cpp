#include "distort/pde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "distort/error.hpp"

namespace distort {

std::vector<double> time_nodes(double a, double b, std::size_t steps, Grading grading,
                               const std::vector<double>& include) {
  if (!(b > a) || steps == 0) throw DomainError("time grid needs a < b and at least one step");
  if (grading == Grading::Sqrt && a < 0.0) throw DomainError("sqrt time grading needs a >= 0");
  std::vector<double> t(steps + 1);
  const double n = static_cast<double>(steps);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double w = static_cast<double>(k) / n;
    if (grading == Grading::Uniform) {
      t[k] = a + w * (b - a);
    } else {
      const double r = std::sqrt(a) + w * (std::sqrt(b) - std::sqrt(a));
      t[k] = r * r;
    }
  }
  t.front() = a;
  t.back() = b;
  for (double p : include) {
    if (!(p > a && p < b)) continue;
    auto it = std::lower_bound(t.begin(), t.end(), p);
    const std::size_t k = static_cast<std::size_t>(it - t.begin());
    const double step = t[k] - t[k - 1];
    // snap to a nearby node rather than creating a sliver step
    if (t[k] - p < 1e-3 * step && k + 1 < t.size()) {
      t[k] = p;
    } else if (p - t[k - 1] < 1e-3 * step && k - 1 > 0) {
      t[k - 1] = p;
    } else {
      t.insert(it, p);
    }
  }
  return t;
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw DomainError("uniform grid needs n >= 2 and lo < hi");
  std::vector<double> x(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) x[i] = lo + h * static_cast<double>(i);
  x.back() = hi;
  return x;
}

bool is_uniform(const std::vector<double>& x, double rel_tol) {
  if (x.size() < 2) return false;
  const double h = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
  if (!(h > 0.0)) return false;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (std::abs(x[i] - x[i - 1] - h) > rel_tol * h + 1e-13 * std::abs(x[i])) return false;
  }
  return true;
}

ParabolicStepper::ParabolicStepper(std::vector<double> x, double sigma, Boundary left, Boundary right,
                                   std::size_t columns, std::vector<double> left_values,
                                   std::vector<double> right_values)
    : x_(std::move(x)), sigma_(sigma), left_(left), right_(right), m_(columns), lv_(std::move(left_values)),
      rv_(std::move(right_values)) {
  if (x_.size() < 3) throw DomainError("PDE grid needs at least 3 points");
  if (!is_uniform(x_)) throw DomainError("PDE grid must be uniform");
  if (!(sigma_ > 0.0)) throw DomainError("PDE diffusion coefficient must be positive");
  if (m_ == 0) throw DomainError("PDE needs at least one column");
  if (left_ == Boundary::Dirichlet && lv_.size() != m_) throw DomainError("left Dirichlet values missing");
  if (right_ == Boundary::Dirichlet && rv_.size() != m_) throw DomainError("right Dirichlet values missing");
  dx_ = (x_.back() - x_.front()) / static_cast<double>(x_.size() - 1);
  const std::size_t n = x_.size();
  rhs_.resize(n * m_);
  cp_.resize(n);
  lower_.resize(n);
  diag_.resize(n);
  upper_.resize(n);
}

void ParabolicStepper::coefficients(double v, double& a, double& b, double& c) const {
  const double D = 0.5 * sigma_ * sigma_ / (dx_ * dx_);
  if (std::abs(v) * dx_ <= sigma_ * sigma_) {
    a = D - 0.5 * v / dx_;
    c = D + 0.5 * v / dx_;
    b = -2.0 * D;
  } else if (v > 0.0) {
    a = D;
    c = D + v / dx_;
    b = -2.0 * D - v / dx_;
  } else {
    a = D - v / dx_;
    c = D;
    b = -2.0 * D + v / dx_;
  }
}

void ParabolicStepper::step(std::span<double> W, double dt, double theta, std::span<const double> v_old,
                            std::span<const double> v_new) {
  const std::size_t n = x_.size(), m = m_;
  const double D = 0.5 * sigma_ * sigma_ / (dx_ * dx_);
  const double ex = (1.0 - theta) * dt, im = theta * dt;

  // right-hand side
  for (std::size_t j = 0; j < n; ++j) {
    double* r = &rhs_[j * m];
    const double* w = &W[j * m];
    if (j == 0 || j == n - 1) {
      const bool left = j == 0;
      if ((left ? left_ : right_) == Boundary::Dirichlet) {
        const auto& vals = left ? lv_ : rv_;
        for (std::size_t c = 0; c < m; ++c) r[c] = vals[c];
      } else {
        const double* nb = &W[(left ? 1 : n - 2) * m];
        for (std::size_t c = 0; c < m; ++c) r[c] = w[c] + ex * 2.0 * D * (nb[c] - w[c]);
      }
      continue;
    }
    double a = 0, b = 0, cc = 0;
    if (ex != 0.0) coefficients(v_old[j], a, b, cc);
    const double* wl = &W[(j - 1) * m];
    const double* wr = &W[(j + 1) * m];
    for (std::size_t c = 0; c < m; ++c) r[c] = w[c] + ex * (a * wl[c] + b * w[c] + cc * wr[c]);
  }

  // implicit matrix
  for (std::size_t j = 0; j < n; ++j) {
    if (j == 0 || j == n - 1) {
      const bool left = j == 0;
      if ((left ? left_ : right_) == Boundary::Dirichlet) {
        lower_[j] = upper_[j] = 0.0;
        diag_[j] = 1.0;
      } else {
        diag_[j] = 1.0 + im * 2.0 * D;
        lower_[j] = left ? 0.0 : -im * 2.0 * D;
        upper_[j] = left ? -im * 2.0 * D : 0.0;
      }
      continue;
    }
    double a, b, cc;
    coefficients(v_new[j], a, b, cc);
    lower_[j] = -im * a;
    diag_[j] = 1.0 - im * b;
    upper_[j] = -im * cc;
  }

  // Thomas algorithm, factorization shared by all columns
  double inv = 1.0 / diag_[0];
  cp_[0] = upper_[0] * inv;
  for (std::size_t c = 0; c < m; ++c) rhs_[c] *= inv;
  for (std::size_t j = 1; j < n; ++j) {
    inv = 1.0 / (diag_[j] - lower_[j] * cp_[j - 1]);
    cp_[j] = upper_[j] * inv;
    double* r = &rhs_[j * m];
    const double* rp = &rhs_[(j - 1) * m];
    for (std::size_t c = 0; c < m; ++c) r[c] = (r[c] - lower_[j] * rp[c]) * inv;
  }
  for (std::size_t c = 0; c < m; ++c) W[(n - 1) * m + c] = rhs_[(n - 1) * m + c];
  for (std::size_t j = n - 1; j-- > 0;) {
    double* w = &W[j * m];
    const double* wn = &W[(j + 1) * m];
    const double* r = &rhs_[j * m];
    for (std::size_t c = 0; c < m; ++c) w[c] = r[c] - cp_[j] * wn[c];
  }
}

void ParabolicStepper::integrate(std::span<double> W, const std::vector<double>& nodes, int rannacher,
                                 const std::function<void(double, std::span<double>)>& velocity,
                                 const std::function<void(std::size_t)>& after) {
  if (W.size() != x_.size() * m_) throw DomainError("PDE state has the wrong size");
  const std::size_t n = x_.size();
  std::vector<double> v_old(n), v_mid(n), v_new(n);
  velocity(nodes.front(), v_old);
  if (after) after(0);
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    const double dt = nodes[k] - nodes[k - 1];
    if (static_cast<int>(k) <= rannacher) {
      velocity(nodes[k - 1] + 0.5 * dt, v_mid);
      step(W, 0.5 * dt, 1.0, v_old, v_mid);
      velocity(nodes[k], v_new);
      step(W, 0.5 * dt, 1.0, v_mid, v_new);
    } else {
      velocity(nodes[k], v_new);
      step(W, dt, 0.5, v_old, v_new);
    }
    std::swap(v_old, v_new);
    if (after) after(k);
  }
}

}  // namespace distort
