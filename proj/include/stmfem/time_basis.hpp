#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace stmfem {

/// Decomposition 0 = t_0 < t_1 < ... < t_N = T of the time interval.
class TimePartition {
 public:
  explicit TimePartition(std::vector<double> nodes);
  static TimePartition uniform(double final_time, int intervals);

  int intervals() const { return static_cast<int>(nodes_.size()) - 1; }
  double final_time() const { return nodes_.back(); }
  /// Interval n is (t_{n-1}, t_n] for n = 1..N.
  double start(int n) const { return nodes_.at(n - 1); }
  double end(int n) const { return nodes_.at(n); }
  double step(int n) const { return end(n) - start(n); }
  double max_step() const;
  const std::vector<double>& nodes() const { return nodes_; }

 private:
  std::vector<double> nodes_;
};

/// Lagrange polynomials on arbitrary distinct nodes, barycentric form.
class LagrangeBasis1D {
 public:
  LagrangeBasis1D() = default;
  explicit LagrangeBasis1D(std::vector<double> nodes);

  int size() const { return static_cast<int>(nodes_.size()); }
  int degree() const { return size() - 1; }
  const std::vector<double>& nodes() const { return nodes_; }

  double value(int j, double t) const;
  double derivative(int j, double t) const;
  /// Fills all basis values at t; out.size() must equal size().
  void values(double t, std::span<double> out) const;
  void derivatives(double t, std::span<double> out) const;
  /// d/dt of basis j at node i, exact differentiation of the interpolant.
  double derivative_at_node(int j, int i) const;

 private:
  std::vector<double> nodes_;
  std::vector<double> bary_;
};

/// cGP(r) temporal bases on the reference interval [0,1].
///
/// Trial nodes are t0 = 0 followed by the r Gauss points; test nodes are the
/// Gauss points alone. alpha(i-1, j) = w_i * phi_j'(t_i) for i = 1..r, j = 0..r
/// and beta(i-1) = w_i.
struct TemporalBasis {
  int r = 0;
  LagrangeBasis1D trial;
  LagrangeBasis1D test;
  std::vector<double> gauss_weights;
  Eigen::MatrixXd alpha;  // r x (r+1)
  Eigen::VectorXd beta;   // r

  const std::vector<double>& trial_nodes() const { return trial.nodes(); }
  /// Gauss points t_1..t_r on [0,1].
  std::span<const double> gauss_points() const {
    return std::span<const double>(trial.nodes()).subspan(1);
  }
  double eval_trial(int j, double t_hat) const { return trial.value(j, t_hat); }
  double eval_trial_deriv(int j, double t_hat) const { return trial.derivative(j, t_hat); }
  /// Test function index i runs from 1 to r.
  double eval_test(int i, double t_hat) const { return test.value(i - 1, t_hat); }
  /// phi_j(1) for j = 0..r; the weights for passing a solution to the next interval.
  std::vector<double> endpoint_values() const;
};

inline constexpr int kMaxTimeDegree = 5;

/// Throws std::invalid_argument unless 1 <= r <= kMaxTimeDegree.
TemporalBasis build_basis(int r);

/// Evaluates sum_j coeffs[j] * phi_{n,j}(t) for t in [t_{n-1}, t_n].
Eigen::VectorXd reconstruct(std::span<const Eigen::VectorXd> coeffs, const TemporalBasis& basis,
                            const TimePartition& partition, int n, double t);

}  // namespace stmfem
