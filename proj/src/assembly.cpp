#include "stmfem/assembly.hpp"

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "stmfem/mesh.hpp"
#include "stmfem/spaces.hpp"

namespace stmfem {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix finalize(int rows, int cols, const Triplets& triplets) {
  SparseMatrix m(rows, cols);
  // setFromTriplets sums duplicates in insertion order, so the result only
  // depends on the cell loop order.
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.prune(0.0);
  m.makeCompressed();
  return m;
}

// Reference basis values at every rule point, shared by all cells.
struct FluxTable {
  std::vector<Eigen::Matrix2Xd> values;
  std::vector<std::vector<double>> div;
};

FluxTable tabulate(const FluxReferenceElement& el, const TensorRule2D& rule) {
  FluxTable t;
  const int n = el.size();
  for (const auto& x : rule.points) {
    Eigen::Matrix2Xd v(2, n);
    el.values(x, v);
    t.values.push_back(std::move(v));
    std::vector<double> d(n);
    el.divergence(x, d);
    t.div.push_back(std::move(d));
  }
  return t;
}

Eigen::MatrixXd tabulate(const ScalarReferenceElement& el, const TensorRule2D& rule) {
  Eigen::MatrixXd phi(el.size(), rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) {
    el.values(rule.points[q], std::span<double>(phi.col(q).data(), el.size()));
  }
  return phi;
}

}  // namespace

CoefficientField CoefficientField::constant(double d) {
  if (!(d > 0.0)) throw InvalidCoefficientError("CoefficientField: d must be positive");
  return constant(Eigen::Matrix2d::Identity() * d);
}

CoefficientField CoefficientField::constant(const Eigen::Matrix2d& d) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(d);
  CoefficientField field;
  field.tensor = [d](const Point2&) { return d; };
  field.d_min = eig.eigenvalues().minCoeff();
  field.d_max = eig.eigenvalues().maxCoeff();
  field.is_constant = true;
  field.check({0.5, 0.5});
  return field;
}

void CoefficientField::check(const Point2& x) const {
  const Eigen::Matrix2d d = tensor(x);
  const double scale = d.norm();
  if (std::abs(d(0, 1) - d(1, 0)) > 1e-14 * scale) {
    throw InvalidCoefficientError("diffusion tensor is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(d);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double slack = 1e-12 * scale;
  if (!(lo > 0.0) || lo < d_min - slack || hi > d_max + slack) {
    throw InvalidCoefficientError("diffusion tensor is not SPD within its ellipticity bounds");
  }
}

SparseMatrix assemble_mass_scalar(const ScalarSpace& space) {
  return assemble_mass_scalar(space, default_rule(space.degree()));
}

SparseMatrix assemble_mass_scalar(const ScalarSpace& space, const TensorRule2D& rule) {
  const int n = space.dofs_per_cell();
  const Eigen::MatrixXd phi = tabulate(space.element(), rule);
  Triplets triplets;
  triplets.reserve(static_cast<std::size_t>(space.mesh().num_cells()) * n * n);
  Eigen::MatrixXd local(n, n);
  for (int k = 0; k < space.mesh().num_cells(); ++k) {
    const CellMap map(space.mesh(), k);
    local.setZero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      local.noalias() +=
          (rule.weights[q] * map.det(rule.points[q])) * phi.col(q) * phi.col(q).transpose();
    }
    local = 0.5 * (local + local.transpose()).eval();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) triplets.emplace_back(space.dof(k, i), space.dof(k, j), local(i, j));
    }
  }
  return finalize(space.dimension(), space.dimension(), triplets);
}

SparseMatrix assemble_weighted_mass_flux(const FluxSpace& space, const CoefficientField& d) {
  return assemble_weighted_mass_flux(space, d, default_rule(space.degree()));
}

SparseMatrix assemble_weighted_mass_flux(const FluxSpace& space, const CoefficientField& d,
                                         const TensorRule2D& rule) {
  const int n = space.dofs_per_cell();
  const FluxTable table = tabulate(space.element(), rule);
  Triplets triplets;
  triplets.reserve(static_cast<std::size_t>(space.mesh().num_cells()) * n * n);
  Eigen::MatrixXd local(n, n);
  for (int k = 0; k < space.mesh().num_cells(); ++k) {
    const CellMap map(space.mesh(), k);
    local.setZero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point2 x = map.map(rule.points[q]);
      d.check(x);
      const Eigen::Matrix2d J = map.jacobian(rule.points[q]);
      // Piola on both factors: (1/det)^2 * det = 1/det.
      const Eigen::Matrix2d weight =
          (rule.weights[q] / J.determinant()) * J.transpose() * d(x).inverse() * J;
      local.noalias() += table.values[q].transpose() * weight * table.values[q];
    }
    local = 0.5 * (local + local.transpose()).eval();
    const auto dofs = space.cell_dofs(k);
    const auto signs = space.cell_signs(k);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        triplets.emplace_back(dofs[i], dofs[j], signs[i] * signs[j] * local(i, j));
      }
    }
  }
  return finalize(space.dimension(), space.dimension(), triplets);
}

SparseMatrix assemble_div_coupling(const FluxSpace& flux, const ScalarSpace& scalar) {
  return assemble_div_coupling(flux, scalar, default_rule(std::max(flux.degree(), scalar.degree())));
}

SparseMatrix assemble_div_coupling(const FluxSpace& flux, const ScalarSpace& scalar,
                                   const TensorRule2D& rule) {
  if (&flux.mesh() != &scalar.mesh()) {
    throw std::invalid_argument("assemble_div_coupling: spaces live on different meshes");
  }
  const int nv = flux.dofs_per_cell();
  const int nw = scalar.dofs_per_cell();
  const FluxTable table = tabulate(flux.element(), rule);
  const Eigen::MatrixXd phi = tabulate(scalar.element(), rule);
  // det J cancels between the Piola divergence and the measure, so the local
  // matrix is the same on every cell up to edge signs.
  Eigen::MatrixXd local = Eigen::MatrixXd::Zero(nw, nv);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    for (int j = 0; j < nv; ++j) local.col(j) += rule.weights[q] * table.div[q][j] * phi.col(q);
  }
  Triplets triplets;
  triplets.reserve(static_cast<std::size_t>(scalar.mesh().num_cells()) * nv * nw);
  for (int k = 0; k < scalar.mesh().num_cells(); ++k) {
    const auto dofs = flux.cell_dofs(k);
    const auto signs = flux.cell_signs(k);
    for (int i = 0; i < nw; ++i) {
      for (int j = 0; j < nv; ++j) {
        triplets.emplace_back(scalar.dof(k, i), dofs[j], signs[j] * local(i, j));
      }
    }
  }
  return finalize(scalar.dimension(), flux.dimension(), triplets);
}

Eigen::VectorXd assemble_load(const ScalarSpace& space, const SpaceTimeField& f, double t) {
  return assemble_load(space, f, t, default_rule(space.degree()));
}

Eigen::VectorXd assemble_load(const ScalarSpace& space, const SpaceTimeField& f, double t,
                              const TensorRule2D& rule) {
  const int n = space.dofs_per_cell();
  const Eigen::MatrixXd phi = tabulate(space.element(), rule);
  Eigen::VectorXd load = Eigen::VectorXd::Zero(space.dimension());
  for (int k = 0; k < space.mesh().num_cells(); ++k) {
    const CellMap map(space.mesh(), k);
    auto cell = load.segment(space.dof(k, 0), n);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point2& xh = rule.points[q];
      cell += (rule.weights[q] * map.det(xh) * f(map.map(xh), t)) * phi.col(q);
    }
  }
  return load;
}

void write_coordinate(std::ostream& os, const SparseMatrix& m) {
  const auto old_precision = os.precision(17);
  os << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  for (int r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  os.precision(old_precision);
}

}  // namespace stmfem
