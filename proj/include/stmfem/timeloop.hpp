#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stmfem/assembly.hpp"
#include "stmfem/spaces.hpp"
#include "stmfem/time_basis.hpp"

namespace stmfem {

/// dt u - div(D grad u) = f in (0,1)^2 x (0,T], u = 0 on the boundary, u(.,0) = u0.
struct ProblemData {
  CoefficientField diffusion = CoefficientField::constant(1.0);
  ScalarField u0;
  VectorField grad_u0;
  SpaceTimeField f;
  double final_time = 1.0;
};

/// The three time-independent spatial operators of the scheme.
struct SpatialOperators {
  SparseMatrix mass_scalar;  // <w_j, w_i>
  SparseMatrix mass_flux;    // <D^{-1} v_j, v_i>
  SparseMatrix div;          // <div v_j, w_i>

  static SpatialOperators assemble(const SpacePair& spaces, const CoefficientField& d);
  int scalar_dim() const { return static_cast<int>(mass_scalar.rows()); }
  int flux_dim() const { return static_cast<int>(mass_flux.rows()); }
};

/// Block saddle-point system for one interval. Unknowns are ordered
/// [U^1, ..., U^r, Q^1, ..., Q^r]. Scalar block row i:
///   sum_{j>=1} alpha_ij M_W U^j + tau beta_i B Q^i = tau beta_i F(t_{n,i}) - alpha_i0 M_W U^0
/// and flux block row i:
///   M_D Q^i - B^T U^i = 0.
struct StepSystem {
  int interval = 0;
  double tau = 0.0;
  int r = 0;
  int scalar_dim = 0;
  int flux_dim = 0;
  std::shared_ptr<const SparseMatrix> matrix;
  Eigen::VectorXd rhs;

  int size() const { return r * (scalar_dim + flux_dim); }
  Eigen::Index scalar_offset(int i) const { return static_cast<Eigen::Index>(i - 1) * scalar_dim; }
  Eigen::Index flux_offset(int i) const {
    return static_cast<Eigen::Index>(r) * scalar_dim + static_cast<Eigen::Index>(i - 1) * flux_dim;
  }
};

SparseMatrix build_step_matrix(const TemporalBasis& basis, const SpatialOperators& ops, double tau);

/// Assembles the right-hand side for interval n from U_n^0 and f at the Gauss times.
/// Reuses `matrix` when given (it depends on tau only), otherwise builds it.
StepSystem build_step_system(int n, const TimePartition& partition, const TemporalBasis& basis,
                             const SpatialOperators& ops, const ScalarSpace& scalar,
                             const ProblemData& data, const Eigen::VectorXd& u_initial,
                             std::shared_ptr<const SparseMatrix> matrix = nullptr);

enum class SolverKind { Direct, Schur };

std::string to_string(SolverKind kind);
SolverKind parse_solver_kind(const std::string& name);

struct StepResult {
  std::vector<Eigen::VectorXd> U;  // U^1..U^r
  std::vector<Eigen::VectorXd> Q;  // Q^1..Q^r
  double residual = 0.0;           // ||A x - b|| / ||b|| (absolute when b = 0)
  int iterations = 0;              // Krylov iterations, 0 for the direct path
};

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Solves step systems, keeping step_matrices alive across steps that share
/// the same step size.
///
/// Direct: sparse LU of the monolithic block matrix.
/// Schur: Q^i = M_D^{-1} B^T U^i is eliminated and the coupled scalar system
///   sum_j alpha_ij M_W U^j + tau beta_i B M_D^{-1} B^T U^i = g_i
/// is solved by restarted GMRES, right-preconditioned with (alpha_hat (x) M_W)^{-1}
/// where alpha_hat drops column 0. Flux mass solves use a sparse Cholesky factor.
class StepSolver {
 public:
  struct Options {
    double tolerance = 1e-12;
    int gmres_restart = 60;
    int max_iterations = 5000;
  };

  StepSolver(const TemporalBasis& basis, std::shared_ptr<const SpatialOperators> ops,
             SolverKind kind);
  StepSolver(const TemporalBasis& basis, std::shared_ptr<const SpatialOperators> ops,
             SolverKind kind, Options options);
  ~StepSolver();
  StepSolver(StepSolver&&) noexcept;
  StepSolver& operator=(StepSolver&&) noexcept;

  StepResult solve(const StepSystem& system);
  SolverKind kind() const { return kind_; }

 private:
  struct Impl;
  SolverKind kind_;
  Options options_;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper around StepSolver.
StepResult solve_step(const StepSystem& system, const TemporalBasis& basis,
                      std::shared_ptr<const SpatialOperators> ops, SolverKind kind,
                      double tolerance = 1e-12);

/// Relative residual ||A x - b|| / ||b|| of the monolithic system.
double step_residual(const StepSystem& system, const StepResult& result);

/// Coefficient vectors of the trial expansion on one interval, j = 0..r.
struct IntervalCoefficients {
  std::vector<Eigen::VectorXd> U;
  std::vector<Eigen::VectorXd> Q;
};

struct SolverStats {
  int steps = 0;
  int krylov_iterations = 0;
  double max_residual = 0.0;
  int step_matrices = 0;
};

struct SpaceTimeSolution {
  TimePartition partition{std::vector<double>{0.0, 1.0}};
  TemporalBasis basis;
  std::shared_ptr<const SpacePair> spaces;
  std::vector<IntervalCoefficients> intervals;  // intervals[n-1] holds interval n
  SolverStats stats;

  /// Interval containing t; interior nodes t_n are assigned to interval n.
  /// Throws std::invalid_argument outside [0, T].
  int interval_of(double t) const;
  Eigen::VectorXd scalar_coefficients(int n, double t) const;
  Eigen::VectorXd flux_coefficients(int n, double t) const;
  double eval_u(int cell, const Point2& ref, double t) const;
  Eigen::Vector2d eval_q(int cell, const Point2& ref, double t) const;
  double eval_div_q(int cell, const Point2& ref, double t) const;
};

/// U_1^0 = P_h u0 and Q_1^0 = P_h(-D grad u0).
std::pair<Eigen::VectorXd, Eigen::VectorXd> initial_coefficients(const ProblemData& data,
                                                                  const SpacePair& spaces);

/// Start values of the next interval: the previous expansion evaluated at t_hat = 1.
std::pair<Eigen::VectorXd, Eigen::VectorXd> advance(const IntervalCoefficients& previous,
                                                    const TemporalBasis& basis);

struct RunOptions {
  SolverKind solver = SolverKind::Direct;
  double tolerance = 1e-12;
};

SpaceTimeSolution run(const ProblemData& data, std::shared_ptr<const SpacePair> spaces,
                      const TimePartition& partition, int r, const RunOptions& options = {});

/// Builds the spaces on `mesh` and a uniform partition with N intervals.
SpaceTimeSolution run(const ProblemData& data, std::shared_ptr<const QuadMesh> mesh, int p, int r,
                      int intervals, const RunOptions& options = {});

/// Text checkpoint. One vector per line:
///   <U|Q> <interval> <j> <length> <v_0> ... <v_{length-1}>
/// preceded by a header "stmfem-checkpoint r <r> intervals <N>".
void write_checkpoint(std::ostream& os, const SpaceTimeSolution& solution);
std::vector<IntervalCoefficients> read_checkpoint(std::istream& is);

}  // namespace stmfem
