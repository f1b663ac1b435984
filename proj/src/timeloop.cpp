#include "stmfem/timeloop.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace stmfem {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
using ColMajorSparse = Eigen::SparseMatrix<double, Eigen::ColMajor>;

void append_block(Triplets& out, const SparseMatrix& m, Eigen::Index row0, Eigen::Index col0,
                  double scale, bool transpose = false) {
  for (int r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      const auto row = transpose ? it.col() : it.row();
      const auto col = transpose ? it.row() : it.col();
      out.emplace_back(static_cast<int>(row0 + row), static_cast<int>(col0 + col),
                       scale * it.value());
    }
  }
}

StepSystem make_system(int n, double t_start, double tau, const TemporalBasis& basis,
                       const SpatialOperators& ops, const ScalarSpace& scalar,
                       const ProblemData& data, const Eigen::VectorXd& u_initial,
                       std::shared_ptr<const SparseMatrix> matrix) {
  StepSystem s;
  s.interval = n;
  s.tau = tau;
  s.r = basis.r;
  s.scalar_dim = ops.scalar_dim();
  s.flux_dim = ops.flux_dim();
  s.matrix = matrix ? std::move(matrix)
                    : std::make_shared<const SparseMatrix>(build_step_matrix(basis, ops, tau));
  s.rhs = Eigen::VectorXd::Zero(s.size());
  const Eigen::VectorXd mass_u0 = ops.mass_scalar * u_initial;
  const auto gauss = basis.gauss_points();
  for (int i = 1; i <= basis.r; ++i) {
    const double t = t_start + tau * gauss[i - 1];
    auto block = s.rhs.segment(s.scalar_offset(i), s.scalar_dim);
    if (data.f) block = (tau * basis.beta(i - 1)) * assemble_load(scalar, data.f, t);
    block -= basis.alpha(i - 1, 0) * mass_u0;
  }
  return s;
}

}  // namespace

SpatialOperators SpatialOperators::assemble(const SpacePair& spaces, const CoefficientField& d) {
  const auto rule = default_rule(spaces.scalar.degree());
  return SpatialOperators{assemble_mass_scalar(spaces.scalar, rule),
                          assemble_weighted_mass_flux(spaces.flux, d, rule),
                          assemble_div_coupling(spaces.flux, spaces.scalar, rule)};
}

SparseMatrix build_step_matrix(const TemporalBasis& basis, const SpatialOperators& ops,
                               double tau) {
  const int r = basis.r;
  const Eigen::Index nw = ops.scalar_dim();
  const Eigen::Index nv = ops.flux_dim();
  Triplets t;
  t.reserve(static_cast<std::size_t>(r * r * ops.mass_scalar.nonZeros() +
                                     2 * r * ops.div.nonZeros() + r * ops.mass_flux.nonZeros()));
  for (int i = 1; i <= r; ++i) {
    const Eigen::Index row_u = (i - 1) * nw;
    const Eigen::Index row_q = r * nw + (i - 1) * nv;
    for (int j = 1; j <= r; ++j) {
      append_block(t, ops.mass_scalar, row_u, (j - 1) * nw, basis.alpha(i - 1, j));
    }
    append_block(t, ops.div, row_u, row_q, tau * basis.beta(i - 1));
    append_block(t, ops.mass_flux, row_q, row_q, 1.0);
    append_block(t, ops.div, row_q, row_u, -1.0, /*transpose=*/true);
  }
  const Eigen::Index n = r * (nw + nv);
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  m.prune(0.0);
  m.makeCompressed();
  return m;
}

StepSystem build_step_system(int n, const TimePartition& partition, const TemporalBasis& basis,
                             const SpatialOperators& ops, const ScalarSpace& scalar,
                             const ProblemData& data, const Eigen::VectorXd& u_initial,
                             std::shared_ptr<const SparseMatrix> matrix) {
  return make_system(n, partition.start(n), partition.step(n), basis, ops, scalar, data,
                     u_initial, std::move(matrix));
}

std::string to_string(SolverKind kind) { return kind == SolverKind::Direct ? "direct" : "schur"; }

SolverKind parse_solver_kind(const std::string& name) {
  if (name == "direct") return SolverKind::Direct;
  if (name == "schur") return SolverKind::Schur;
  throw std::invalid_argument("unknown solver '" + name + "' (expected direct or schur)");
}

double step_residual(const StepSystem& system, const StepResult& result) {
  Eigen::VectorXd x(system.size());
  for (int i = 1; i <= system.r; ++i) {
    x.segment(system.scalar_offset(i), system.scalar_dim) = result.U[i - 1];
    x.segment(system.flux_offset(i), system.flux_dim) = result.Q[i - 1];
  }
  const double res = (*system.matrix * x - system.rhs).norm();
  const double b = system.rhs.norm();
  return b > 0.0 ? res / b : res;
}

struct StepSolver::Impl {
  // Direct path.
  std::shared_ptr<const SparseMatrix> factored_matrix;
  Eigen::SparseLU<ColMajorSparse, Eigen::COLAMDOrdering<int>> lu;

  // Schur path.
  std::shared_ptr<const SpatialOperators> ops;
  Eigen::SimplicialLDLT<ColMajorSparse> flux_mass;
  Eigen::SimplicialLLT<ColMajorSparse> scalar_mass;
  Eigen::MatrixXd alpha_hat_inverse;
  Eigen::MatrixXd alpha;
  Eigen::VectorXd beta;
  int r = 0;
  bool schur_ready = false;
};

StepSolver::StepSolver(const TemporalBasis& basis, std::shared_ptr<const SpatialOperators> ops,
                       SolverKind kind)
    : StepSolver(basis, std::move(ops), kind, Options{}) {}

StepSolver::StepSolver(const TemporalBasis& basis, std::shared_ptr<const SpatialOperators> ops,
                       SolverKind kind, Options options)
    : kind_(kind), options_(options), impl_(std::make_unique<Impl>()) {
  impl_->ops = std::move(ops);
  impl_->r = basis.r;
  impl_->alpha = basis.alpha;
  impl_->beta = basis.beta;
  impl_->alpha_hat_inverse = basis.alpha.rightCols(basis.r).inverse();
}

StepSolver::~StepSolver() = default;
StepSolver::StepSolver(StepSolver&&) noexcept = default;
StepSolver& StepSolver::operator=(StepSolver&&) noexcept = default;

namespace {

void split_solution(const StepSystem& s, const Eigen::VectorXd& x, StepResult& out) {
  out.U.resize(s.r);
  out.Q.resize(s.r);
  for (int i = 1; i <= s.r; ++i) {
    out.U[i - 1] = x.segment(s.scalar_offset(i), s.scalar_dim);
    out.Q[i - 1] = x.segment(s.flux_offset(i), s.flux_dim);
  }
}

// Restarted GMRES with right preconditioning and modified Gram-Schmidt.
// Returns the iteration count; x holds the approximate solution.
template <class Apply, class Precondition>
int gmres(const Apply& apply, const Precondition& precondition, const Eigen::VectorXd& b,
          Eigen::VectorXd& x, double rel_tol, int restart, int max_iterations) {
  const double b_norm = b.norm();
  const double target = rel_tol * b_norm;
  int total = 0;
  Eigen::VectorXd r = b - apply(x);
  double beta = r.norm();
  double previous = std::numeric_limits<double>::infinity();
  while (beta > target && total < max_iterations) {
    Eigen::MatrixXd V(b.size(), restart + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(restart);
    Eigen::VectorXd sn = Eigen::VectorXd::Zero(restart);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(restart + 1);
    V.col(0) = r / beta;
    g[0] = beta;
    int k = 0;
    for (; k < restart && total < max_iterations; ++k, ++total) {
      Eigen::VectorXd w = apply(precondition(V.col(k)));
      for (int i = 0; i <= k; ++i) {
        H(i, k) = V.col(i).dot(w);
        w -= H(i, k) * V.col(i);
      }
      H(k + 1, k) = w.norm();
      if (H(k + 1, k) > 0.0) V.col(k + 1) = w / H(k + 1, k);
      for (int i = 0; i < k; ++i) {
        const double tmp = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = tmp;
      }
      const double denom = std::hypot(H(k, k), H(k + 1, k));
      cs[k] = H(k, k) / denom;
      sn[k] = H(k + 1, k) / denom;
      H(k, k) = denom;
      H(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      if (std::abs(g[k + 1]) <= 0.5 * target) {
        ++k;
        ++total;
        break;
      }
    }
    const Eigen::VectorXd y =
        H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    x += precondition(V.leftCols(k) * y);
    r = b - apply(x);
    beta = r.norm();
    // Stagnation: the true residual stopped improving at rounding level.
    if (beta >= 0.99 * previous) break;
    previous = beta;
  }
  return total;
}

}  // namespace

StepResult StepSolver::solve(const StepSystem& s) {
  if (s.r != impl_->r) throw std::invalid_argument("StepSolver: temporal degree mismatch");
  StepResult out;
  if (s.rhs.norm() == 0.0) {
    split_solution(s, Eigen::VectorXd::Zero(s.size()), out);
    return out;
  }

  if (kind_ == SolverKind::Direct) {
    if (impl_->factored_matrix != s.matrix) {
      const ColMajorSparse a = *s.matrix;
      impl_->lu.analyzePattern(a);
      impl_->lu.factorize(a);
      if (impl_->lu.info() != Eigen::Success) {
        throw SolverFailure("direct solver: LU factorization failed on interval " +
                                std::to_string(s.interval) + ": " + impl_->lu.lastErrorMessage(),
                            std::numeric_limits<double>::infinity());
      }
      impl_->factored_matrix = s.matrix;
    }
    Eigen::VectorXd x = impl_->lu.solve(s.rhs);
    // A few sweeps of iterative refinement recover the rounding lost in the
    // LU factors on large levels.
    const double b_norm = s.rhs.norm();
    for (int sweep = 0; sweep < 3; ++sweep) {
      const Eigen::VectorXd residual = s.rhs - *s.matrix * x;
      if (residual.norm() <= 0.01 * options_.tolerance * b_norm) break;
      x += impl_->lu.solve(residual);
    }
    split_solution(s, x, out);
  } else {
    const SpatialOperators& ops = *impl_->ops;
    if (!impl_->schur_ready) {
      impl_->flux_mass.compute(ColMajorSparse(ops.mass_flux));
      impl_->scalar_mass.compute(ColMajorSparse(ops.mass_scalar));
      if (impl_->flux_mass.info() != Eigen::Success ||
          impl_->scalar_mass.info() != Eigen::Success) {
        throw SolverFailure("schur solver: mass matrix factorization failed",
                            std::numeric_limits<double>::infinity());
      }
      impl_->schur_ready = true;
    }
    const int r = s.r;
    const Eigen::Index nw = s.scalar_dim;
    const double tau = s.tau;
    const auto& alpha = impl_->alpha;
    const auto& beta = impl_->beta;
    auto& md = impl_->flux_mass;

    // Reduced right-hand side: g_i = f_i - tau beta_i B M_D^{-1} h_i.
    Eigen::VectorXd g(r * nw);
    for (int i = 1; i <= r; ++i) {
      g.segment((i - 1) * nw, nw) = s.rhs.segment(s.scalar_offset(i), nw);
      const auto h = s.rhs.segment(s.flux_offset(i), s.flux_dim);
      if (h.squaredNorm() > 0.0) {
        g.segment((i - 1) * nw, nw) -= tau * beta(i - 1) * (ops.div * md.solve(h.eval()));
      }
    }
    auto apply = [&](const Eigen::VectorXd& u) {
      Eigen::VectorXd y = Eigen::VectorXd::Zero(r * nw);
      std::vector<Eigen::VectorXd> mu(r);
      for (int j = 0; j < r; ++j) mu[j] = ops.mass_scalar * u.segment(j * nw, nw);
      for (int i = 0; i < r; ++i) {
        auto yi = y.segment(i * nw, nw);
        for (int j = 0; j < r; ++j) yi += alpha(i, j + 1) * mu[j];
        const Eigen::VectorXd bt = ops.div.transpose() * u.segment(i * nw, nw);
        yi += tau * beta(i) * (ops.div * md.solve(bt));
      }
      return y;
    };
    auto precondition = [&](const Eigen::VectorXd& v) {
      std::vector<Eigen::VectorXd> w(r);
      for (int j = 0; j < r; ++j) w[j] = impl_->scalar_mass.solve(v.segment(j * nw, nw).eval());
      Eigen::VectorXd z = Eigen::VectorXd::Zero(r * nw);
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) z.segment(i * nw, nw) += impl_->alpha_hat_inverse(i, j) * w[j];
      }
      return z;
    };
    Eigen::VectorXd u = Eigen::VectorXd::Zero(r * nw);
    out.iterations = gmres(apply, precondition, g, u, 0.1 * options_.tolerance,
                           options_.gmres_restart, options_.max_iterations);
    out.U.resize(r);
    out.Q.resize(r);
    for (int i = 1; i <= r; ++i) {
      out.U[i - 1] = u.segment((i - 1) * nw, nw);
      Eigen::VectorXd rhs_q = s.rhs.segment(s.flux_offset(i), s.flux_dim);
      rhs_q += ops.div.transpose() * out.U[i - 1];
      out.Q[i - 1] = md.solve(rhs_q);
    }
  }

  out.residual = step_residual(s, out);
  if (!(out.residual <= options_.tolerance)) {
    std::ostringstream msg;
    msg << to_string(kind_) << " solver: relative residual " << out.residual
        << " exceeds tolerance " << options_.tolerance << " on interval " << s.interval;
    if (kind_ == SolverKind::Schur) msg << " after " << out.iterations << " GMRES iterations";
    throw SolverFailure(msg.str(), out.residual);
  }
  return out;
}

StepResult solve_step(const StepSystem& system, const TemporalBasis& basis,
                      std::shared_ptr<const SpatialOperators> ops, SolverKind kind,
                      double tolerance) {
  StepSolver::Options options;
  options.tolerance = tolerance;
  StepSolver solver(basis, std::move(ops), kind, options);
  return solver.solve(system);
}

int SpaceTimeSolution::interval_of(double t) const {
  const auto& nodes = partition.nodes();
  if (!(t >= nodes.front() && t <= nodes.back())) {
    throw std::invalid_argument("interval_of: t outside [0, T]");
  }
  if (t == nodes.front()) return 1;
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), t);
  return static_cast<int>(it - nodes.begin());
}

Eigen::VectorXd SpaceTimeSolution::scalar_coefficients(int n, double t) const {
  return reconstruct(intervals.at(n - 1).U, basis, partition, n, t);
}

Eigen::VectorXd SpaceTimeSolution::flux_coefficients(int n, double t) const {
  return reconstruct(intervals.at(n - 1).Q, basis, partition, n, t);
}

double SpaceTimeSolution::eval_u(int cell, const Point2& ref, double t) const {
  const FeFunction f{SpaceKind::Scalar, scalar_coefficients(interval_of(t), t)};
  return eval_scalar(spaces->scalar, f, cell, ref);
}

Eigen::Vector2d SpaceTimeSolution::eval_q(int cell, const Point2& ref, double t) const {
  const FeFunction v{SpaceKind::Flux, flux_coefficients(interval_of(t), t)};
  return eval_flux(spaces->flux, v, cell, ref);
}

double SpaceTimeSolution::eval_div_q(int cell, const Point2& ref, double t) const {
  const FeFunction v{SpaceKind::Flux, flux_coefficients(interval_of(t), t)};
  return eval_div_flux(spaces->flux, v, cell, ref);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> initial_coefficients(const ProblemData& data,
                                                                  const SpacePair& spaces) {
  Eigen::VectorXd u = l2_project_scalar(data.u0, spaces.scalar).coefficients;
  const CoefficientField& d = data.diffusion;
  const VectorField& grad = data.grad_u0;
  Eigen::VectorXd q =
      l2_project_flux([&](const Point2& x) -> Eigen::Vector2d { return -(d(x) * grad(x)); },
                      spaces.flux)
          .coefficients;
  return {std::move(u), std::move(q)};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> advance(const IntervalCoefficients& previous,
                                                    const TemporalBasis& basis) {
  const auto phi = basis.endpoint_values();
  Eigen::VectorXd u = phi[0] * previous.U[0];
  Eigen::VectorXd q = phi[0] * previous.Q[0];
  for (int j = 1; j <= basis.r; ++j) {
    u += phi[j] * previous.U[j];
    q += phi[j] * previous.Q[j];
  }
  return {std::move(u), std::move(q)};
}

SpaceTimeSolution run(const ProblemData& data, std::shared_ptr<const SpacePair> spaces,
                      const TimePartition& partition, int r, const RunOptions& options) {
  SpaceTimeSolution sol;
  sol.partition = partition;
  sol.basis = build_basis(r);
  sol.spaces = spaces;

  auto ops = std::make_shared<const SpatialOperators>(
      SpatialOperators::assemble(*spaces, data.diffusion));
  StepSolver::Options solver_options;
  solver_options.tolerance = options.tolerance;
  StepSolver solver(sol.basis, ops, options.solver, solver_options);

  auto [u_start, q_start] = initial_coefficients(data, *spaces);

  // Step matrices depend on tau only; uniform partitions differ by rounding.
  std::vector<std::pair<double, std::shared_ptr<const SparseMatrix>>> matrices;
  sol.intervals.reserve(partition.intervals());
  for (int n = 1; n <= partition.intervals(); ++n) {
    double tau = partition.step(n);
    std::shared_ptr<const SparseMatrix> matrix;
    for (const auto& [cached_tau, m] : matrices) {
      if (std::abs(cached_tau - tau) <= 1e-13 * cached_tau) {
        tau = cached_tau;
        matrix = m;
        break;
      }
    }
    if (!matrix) {
      matrix = std::make_shared<const SparseMatrix>(build_step_matrix(sol.basis, *ops, tau));
      matrices.emplace_back(tau, matrix);
      ++sol.stats.step_matrices;
    }
    const StepSystem system = make_system(n, partition.start(n), tau, sol.basis, *ops,
                                          spaces->scalar, data, u_start, matrix);
    StepResult step;
    try {
      step = solver.solve(system);
    } catch (const SolverFailure& e) {
      throw SolverFailure(std::string(e.what()) + " (interval " + std::to_string(n) + ")",
                          e.residual());
    }
    sol.stats.steps += 1;
    sol.stats.krylov_iterations += step.iterations;
    sol.stats.max_residual = std::max(sol.stats.max_residual, step.residual);

    IntervalCoefficients c;
    c.U.reserve(r + 1);
    c.Q.reserve(r + 1);
    c.U.push_back(std::move(u_start));
    c.Q.push_back(std::move(q_start));
    for (int i = 0; i < r; ++i) {
      c.U.push_back(std::move(step.U[i]));
      c.Q.push_back(std::move(step.Q[i]));
    }
    std::tie(u_start, q_start) = advance(c, sol.basis);
    sol.intervals.push_back(std::move(c));
  }
  return sol;
}

SpaceTimeSolution run(const ProblemData& data, std::shared_ptr<const QuadMesh> mesh, int p, int r,
                      int intervals, const RunOptions& options) {
  auto spaces = std::make_shared<const SpacePair>(build_pair(std::move(mesh), p));
  return run(data, std::move(spaces), TimePartition::uniform(data.final_time, intervals), r,
             options);
}

void write_checkpoint(std::ostream& os, const SpaceTimeSolution& solution) {
  const auto old_precision = os.precision(17);
  os << "stmfem-checkpoint r " << solution.basis.r << " intervals " << solution.intervals.size()
     << '\n';
  auto line = [&](char kind, std::size_t n, std::size_t j, const Eigen::VectorXd& v) {
    os << kind << ' ' << n << ' ' << j << ' ' << v.size();
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << v[i];
    os << '\n';
  };
  for (std::size_t n = 0; n < solution.intervals.size(); ++n) {
    const auto& c = solution.intervals[n];
    for (std::size_t j = 0; j < c.U.size(); ++j) line('U', n + 1, j, c.U[j]);
    for (std::size_t j = 0; j < c.Q.size(); ++j) line('Q', n + 1, j, c.Q[j]);
  }
  os.precision(old_precision);
}

std::vector<IntervalCoefficients> read_checkpoint(std::istream& is) {
  std::string magic, key_r, key_n;
  int r = 0;
  std::size_t count = 0;
  if (!(is >> magic >> key_r >> r >> key_n >> count) || magic != "stmfem-checkpoint") {
    throw std::runtime_error("read_checkpoint: bad header");
  }
  std::vector<IntervalCoefficients> out(count);
  for (auto& c : out) {
    c.U.resize(r + 1);
    c.Q.resize(r + 1);
  }
  char kind = 0;
  std::size_t n = 0, j = 0;
  Eigen::Index len = 0;
  while (is >> kind >> n >> j >> len) {
    if (n < 1 || n > count || j > static_cast<std::size_t>(r) || (kind != 'U' && kind != 'Q')) {
      throw std::runtime_error("read_checkpoint: malformed record");
    }
    Eigen::VectorXd v(len);
    for (Eigen::Index i = 0; i < len; ++i) {
      if (!(is >> v[i])) throw std::runtime_error("read_checkpoint: truncated vector");
    }
    (kind == 'U' ? out[n - 1].U : out[n - 1].Q)[j] = std::move(v);
  }
  return out;
}

}  // namespace stmfem
