#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "distort/choquet.hpp"
#include "distort/distortion.hpp"

namespace distort {

// Triangular storage: level i holds i+1 entries, levels stored back to back.
template <class T>
class Ragged {
 public:
  Ragged() = default;
  explicit Ragged(std::size_t levels, T fill = T{}) : levels_(levels), data_(offset(levels), fill) {}

  static constexpr std::size_t offset(std::size_t i) { return i * (i + 1) / 2; }

  std::size_t levels() const { return levels_; }
  T& operator()(std::size_t i, std::size_t j) { return data_[offset(i) + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[offset(i) + j]; }
  std::span<T> level(std::size_t i) { return {data_.data() + offset(i), i + 1}; }
  std::span<const T> level(std::size_t i) const { return {data_.data() + offset(i), i + 1}; }

 private:
  std::size_t levels_ = 0;
  std::vector<T> data_;
};

class TreeModel {
 public:
  TreeModel() = default;
  // states has N+1 levels, up_prob has N levels.
  TreeModel(std::vector<double> times, Ragged<double> states, Ragged<double> up_prob);
  // x_ij = x0 + (2j - i) dx, t_i = i dt, constant up probability.
  static TreeModel symmetric(std::size_t periods, double x0, double dx, double dt, double up = 0.5);

  std::size_t periods() const { return times_.size() - 1; }
  const std::vector<double>& times() const { return times_; }
  double time(std::size_t i) const { return times_[i]; }
  double state(std::size_t i, std::size_t j) const { return states_(i, j); }
  double up(std::size_t i, std::size_t j) const { return up_(i, j); }
  const Ragged<double>& states() const { return states_; }
  const Ragged<double>& up_probs() const { return up_; }

  // Copy with one transition probability replaced.
  TreeModel with_up(std::size_t i, std::size_t j, double p) const;
  TreeModel with_state(std::size_t i, std::size_t j, double x) const;

 private:
  void validate() const;
  std::vector<double> times_;
  Ragged<double> states_;
  Ragged<double> up_;
};

// G_ij = P(X_{t_i} >= x_ij) with complements.
Ragged<Prob> survival_probabilities(const TreeModel& tree);

enum class Mon2Mode { Permissive, Strict };

struct Mon2Violation {
  std::size_t i, j;
  double q_raw;
};

class DistortedTree {
 public:
  const TreeModel& base() const { return base_; }
  const DistortionSpec& schedule() const { return schedule_; }
  std::size_t periods() const { return base_.periods(); }
  Prob survival(std::size_t i, std::size_t j) const { return G_(i, j); }
  const Ragged<Prob>& survival() const { return G_; }
  double q_up(std::size_t i, std::size_t j) const { return q_(i, j); }
  bool mon2_ok(std::size_t i, std::size_t j) const { return ok_(i, j) != 0; }
  const std::vector<Mon2Violation>& violations() const { return violations_; }
  // edges where a survival value underflowed; q falls back to the P-transition
  std::size_t degenerate_edges() const { return degenerate_; }

 private:
  friend DistortedTree distort_tree(TreeModel, const DistortionSpec&, Mon2Mode);
  TreeModel base_;
  DistortionSpec schedule_;
  Ragged<Prob> G_;
  Ragged<double> q_;
  Ragged<unsigned char> ok_;
  std::vector<Mon2Violation> violations_;
  std::size_t degenerate_ = 0;
};

inline constexpr double kMon2Clamp = 1e-9;

DistortedTree distort_tree(TreeModel tree, const DistortionSpec& schedule, Mon2Mode mode = Mon2Mode::Permissive);

// u_n = g on level n; returns levels 0..n.
Ragged<double> backward_induction(const DistortedTree& dt, std::span<const double> g, std::size_t n);

// Q(X_{t_n} >= x_nk | X_{t_i} = x_ij) for k = 0..n
std::vector<Prob> q_conditional_survival(const DistortedTree& dt, std::size_t i, std::size_t j, std::size_t n);
std::vector<Prob> p_conditional_survival(const TreeModel& tree, std::size_t i, std::size_t j, std::size_t n);

class NodePhiTable {
 public:
  NodePhiTable(std::size_t i, std::size_t j, std::size_t n, std::vector<Prob> p_surv, std::vector<Prob> q_surv);
  std::size_t i() const { return i_; }
  std::size_t j() const { return j_; }
  std::size_t n() const { return n_; }
  // survival values over terminal k = 0..n
  const std::vector<Prob>& p_survival() const { return p_; }
  const std::vector<Prob>& q_survival() const { return q_; }
  // piecewise-linear distortion through (0,0), attained pairs, (1,1)
  double operator()(double p) const;

 private:
  std::size_t i_, j_, n_;
  std::vector<Prob> p_, q_;
  std::vector<double> knots_p_, knots_q_;
};

NodePhiTable phi_at_node(const DistortedTree& dt, std::size_t i, std::size_t j, std::size_t n);

// E_{i,n}[g] at node (i,j) as a Choquet sum using the node's Phi curve.
double choquet_at_node(const NodePhiTable& table, std::span<const double> g_level_n);

struct TowerCheck {
  double max_discrepancy = 0.0;
  std::vector<double> induction;  // E_{r,t} by backward induction at level r
  std::vector<double> direct;     // E_{r,t} by Choquet sums
  std::vector<double> nested;     // E_{r,s}[E_{s,t}] by Choquet sums
};

TowerCheck verify_tower(const DistortedTree& dt, std::span<const double> g_level_t, std::size_t r, std::size_t s,
                        std::size_t t);

double verify_initial_consistency(const DistortedTree& dt);

// One-step naive conditional expectations composed from the last level back.
double naive_nested_expectation(const TreeModel& tree, const DistortionSpec& d, std::span<const double> g);

// Static Choquet value of g(X_{t_N}) from time 0 with phi_{t_N}.
double static_expectation(const TreeModel& tree, const DistortionSpec& d, std::span<const double> g);

double crossing_tree_residual(double p1, double p2, const DistortionSpec& d1, const DistortionSpec& d2,
                              double t1 = 1.0, double t2 = 2.0);

}  // namespace distort
