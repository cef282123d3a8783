#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace distort {

enum class Boundary { Dirichlet, Neumann };
enum class Grading { Uniform, Sqrt };

// Nodes a = t_0 < ... < t_n = b. Sqrt grading is uniform in sqrt(t), which
// concentrates steps near small t. Every point of `include` inside [a,b] is a node.
std::vector<double> time_nodes(double a, double b, std::size_t steps, Grading grading,
                               const std::vector<double>& include = {});

std::vector<double> uniform_grid(double lo, double hi, std::size_t n);
bool is_uniform(const std::vector<double>& x, double rel_tol = 1e-9);

// w_tau = 1/2 sigma^2 w_xx + v(tau, x) w_x for m columns on a uniform grid.
// Centered differences, switching to upwind where the cell Peclet number
// |v| dx / sigma^2 exceeds one.
class ParabolicStepper {
 public:
  ParabolicStepper(std::vector<double> x, double sigma, Boundary left, Boundary right, std::size_t columns,
                   std::vector<double> left_values = {}, std::vector<double> right_values = {});

  std::size_t nx() const { return x_.size(); }
  std::size_t columns() const { return m_; }
  const std::vector<double>& x() const { return x_; }

  // One theta-step of length dt; v_old and v_new are velocities at both ends.
  void step(std::span<double> W, double dt, double theta, std::span<const double> v_old,
            std::span<const double> v_new);

  // Crank-Nicolson over consecutive nodes, with `rannacher` leading steps split
  // into two implicit Euler half-steps. velocity(tau, v) fills v over the grid;
  // after(k) runs once W holds the solution at nodes[k].
  void integrate(std::span<double> W, const std::vector<double>& nodes, int rannacher,
                 const std::function<void(double, std::span<double>)>& velocity,
                 const std::function<void(std::size_t)>& after);

 private:
  void coefficients(double v, double& a, double& b, double& c) const;
  std::vector<double> x_;
  double dx_, sigma_;
  Boundary left_, right_;
  std::size_t m_;
  std::vector<double> lv_, rv_;
  std::vector<double> rhs_, cp_, lower_, diag_, upper_;
};

}  // namespace distort
