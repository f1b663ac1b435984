#include "stmfem/mms.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace stmfem {

namespace {

// div(D grad u) for constant symmetric D from the Hessian entries.
double div_d_grad(const Eigen::Matrix2d& d, double uxx, double uxy, double uyy) {
  return d(0, 0) * uxx + (d(0, 1) + d(1, 0)) * uxy + d(1, 1) * uyy;
}

}  // namespace

ProblemData ManufacturedSolution::problem(double final_time) const {
  ProblemData data;
  data.diffusion = diffusion;
  data.final_time = final_time;
  auto u_fn = u;
  auto grad_fn = grad_u;
  data.u0 = [u_fn](const Point2& x) { return u_fn(x, 0.0); };
  data.grad_u0 = [grad_fn](const Point2& x) { return grad_fn(x, 0.0); };
  data.f = f;
  return data;
}

ManufacturedSolution mms_standard(const CoefficientField& d, double omega) {
  if (!d.is_constant) {
    throw std::invalid_argument("mms_standard: only constant diffusion tensors are supported");
  }
  constexpr double pi = std::numbers::pi;
  const Eigen::Matrix2d D = d({0.5, 0.5});
  ManufacturedSolution m;
  m.omega = omega;
  m.diffusion = d;
  m.u = [omega](const Point2& x, double t) {
    return std::sin(omega * t) * std::sin(pi * x[0]) * std::sin(pi * x[1]);
  };
  m.grad_u = [omega](const Point2& x, double t) -> Eigen::Vector2d {
    const double s = std::sin(omega * t) * pi;
    return {s * std::cos(pi * x[0]) * std::sin(pi * x[1]),
            s * std::sin(pi * x[0]) * std::cos(pi * x[1])};
  };
  m.q = [omega, D](const Point2& x, double t) -> Eigen::Vector2d {
    const double s = std::sin(omega * t) * pi;
    const Eigen::Vector2d g(s * std::cos(pi * x[0]) * std::sin(pi * x[1]),
                            s * std::sin(pi * x[0]) * std::cos(pi * x[1]));
    return -(D * g);
  };
  m.div_q = [omega, D](const Point2& x, double t) {
    const double s = std::sin(omega * t) * pi * pi;
    const double ss = std::sin(pi * x[0]) * std::sin(pi * x[1]);
    const double cc = std::cos(pi * x[0]) * std::cos(pi * x[1]);
    return -div_d_grad(D, -s * ss, s * cc, -s * ss);
  };
  const auto div_q = m.div_q;
  m.f = [omega, div_q](const Point2& x, double t) {
    return omega * std::cos(omega * t) * std::sin(pi * x[0]) * std::sin(pi * x[1]) +
           div_q(x, t);
  };
  return m;
}

ManufacturedSolution polynomial_solution(const CoefficientField& d) {
  if (!d.is_constant) {
    throw std::invalid_argument("polynomial_solution: only constant diffusion tensors are supported");
  }
  const Eigen::Matrix2d D = d({0.5, 0.5});
  ManufacturedSolution m;
  m.diffusion = d;
  m.u = [](const Point2& x, double t) {
    return t * t * x[0] * (1 - x[0]) * x[1] * (1 - x[1]);
  };
  m.grad_u = [](const Point2& x, double t) -> Eigen::Vector2d {
    return {t * t * (1 - 2 * x[0]) * x[1] * (1 - x[1]),
            t * t * x[0] * (1 - x[0]) * (1 - 2 * x[1])};
  };
  const auto grad = m.grad_u;
  m.q = [grad, D](const Point2& x, double t) -> Eigen::Vector2d { return -(D * grad(x, t)); };
  m.div_q = [D](const Point2& x, double t) {
    const double t2 = t * t;
    return -div_d_grad(D, -2 * t2 * x[1] * (1 - x[1]), t2 * (1 - 2 * x[0]) * (1 - 2 * x[1]),
                       -2 * t2 * x[0] * (1 - x[0]));
  };
  const auto div_q = m.div_q;
  m.f = [div_q](const Point2& x, double t) {
    return 2 * t * x[0] * (1 - x[0]) * x[1] * (1 - x[1]) + div_q(x, t);
  };
  return m;
}

SpaceTimeErrors compute_errors(const SpaceTimeSolution& solution, const ManufacturedSolution& exact,
                               const ErrorQuadrature& quad) {
  const ScalarSpace& scalar = solution.spaces->scalar;
  const FluxSpace& flux = solution.spaces->flux;
  const QuadMesh& mesh = scalar.mesh();
  const int r = solution.basis.r;
  const int nw = scalar.dofs_per_cell();
  const int nv = flux.dofs_per_cell();
  const auto space_rule = tensor_gauss(std::max(scalar.degree(), flux.degree()) + quad.extra_space_points);
  const auto time_rule = gauss_legendre_unit(r + quad.extra_time_points);
  const std::size_t nq = space_rule.size();

  // Reference tables.
  Eigen::MatrixXd phi_w(nw, nq);
  std::vector<Eigen::Matrix2Xd> phi_v(nq, Eigen::Matrix2Xd(2, nv));
  Eigen::MatrixXd div_v(nv, nq);
  for (std::size_t q = 0; q < nq; ++q) {
    scalar.element().values(space_rule.points[q], std::span<double>(phi_w.col(q).data(), nw));
    flux.element().values(space_rule.points[q], phi_v[q]);
    flux.element().divergence(space_rule.points[q], std::span<double>(div_v.col(q).data(), nv));
  }

  // Cell geometry at every rule point.
  struct Geometry {
    Point2 x;
    Eigen::Matrix2d J;
    double det;
  };
  std::vector<Geometry> geo(static_cast<std::size_t>(mesh.num_cells()) * nq);
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const CellMap map(mesh, k);
    for (std::size_t q = 0; q < nq; ++q) {
      const Point2& xh = space_rule.points[q];
      auto& g = geo[k * nq + q];
      g.x = map.map(xh);
      g.J = map.jacobian(xh);
      g.det = g.J.determinant();
    }
  }

  std::vector<double> phi_t(r + 1);
  Eigen::VectorXd local_w(nw), local_v(nv);
  double sum_u = 0.0, sum_q = 0.0, sum_div = 0.0;
  const auto& partition = solution.partition;
  for (int n = 1; n <= partition.intervals(); ++n) {
    const auto& coeffs = solution.intervals[n - 1];
    const double t0 = partition.start(n);
    const double tau = partition.step(n);
    for (std::size_t it = 0; it < time_rule.points.size(); ++it) {
      const double th = time_rule.points[it];
      const double t = t0 + tau * th;
      const double wt = tau * time_rule.weights[it];
      solution.basis.trial.values(th, phi_t);
      Eigen::VectorXd uh = phi_t[0] * coeffs.U[0];
      Eigen::VectorXd qh = phi_t[0] * coeffs.Q[0];
      for (int j = 1; j <= r; ++j) {
        uh += phi_t[j] * coeffs.U[j];
        qh += phi_t[j] * coeffs.Q[j];
      }
      for (int k = 0; k < mesh.num_cells(); ++k) {
        local_w = uh.segment(scalar.dof(k, 0), nw);
        const auto dofs = flux.cell_dofs(k);
        const auto signs = flux.cell_signs(k);
        for (int i = 0; i < nv; ++i) local_v[i] = signs[i] * qh[dofs[i]];
        for (std::size_t q = 0; q < nq; ++q) {
          const auto& g = geo[k * nq + q];
          const double w = wt * space_rule.weights[q] * g.det;
          const double eu = exact.u(g.x, t) - phi_w.col(q).dot(local_w);
          const Eigen::Vector2d vq = g.J * (phi_v[q] * local_v) / g.det;
          const Eigen::Vector2d eq = exact.q(g.x, t) - vq;
          const double ediv = exact.div_q(g.x, t) - div_v.col(q).dot(local_v) / g.det;
          sum_u += w * eu * eu;
          sum_q += w * eq.squaredNorm();
          sum_div += w * ediv * ediv;
        }
      }
    }
  }
  return SpaceTimeErrors{std::sqrt(sum_u), std::sqrt(sum_q), std::sqrt(sum_div)};
}

double error_u(const SpaceTimeSolution& solution, const ManufacturedSolution& exact,
               const ErrorQuadrature& quad) {
  return compute_errors(solution, exact, quad).u;
}

double error_q_V(const SpaceTimeSolution& solution, const ManufacturedSolution& exact,
                 const ErrorQuadrature& quad) {
  return compute_errors(solution, exact, quad).q_V();
}

std::vector<std::optional<double>> eoc(std::span<const double> errors) {
  if (errors.size() < 2) throw std::invalid_argument("eoc: need at least two levels");
  std::vector<std::optional<double>> out(errors.size());
  for (std::size_t l = 1; l < errors.size(); ++l) {
    if (errors[l] > 0.0 && errors[l - 1] > 0.0) out[l] = std::log2(errors[l - 1] / errors[l]);
  }
  return out;
}

}  // namespace stmfem
