#include "stmfem/spaces.hpp"

#include <stdexcept>
#include <string>

#include <Eigen/SparseCholesky>

#include "stmfem/assembly.hpp"

namespace stmfem {

namespace {

std::vector<double> normal_nodes(int p) {
  std::vector<double> nodes{0.0};
  if (p > 0) {
    const auto g = gauss_legendre_unit(p);
    nodes.insert(nodes.end(), g.points.begin(), g.points.end());
  }
  nodes.push_back(1.0);
  return nodes;
}

void check_degree(int p) {
  if (p < 0 || p > kMaxSpaceDegree) {
    throw std::invalid_argument("space degree " + std::to_string(p) + " outside [0, " +
                                std::to_string(kMaxSpaceDegree) + "]");
  }
}

}  // namespace

ScalarReferenceElement::ScalarReferenceElement(int p)
    : p_(p), lagrange_((check_degree(p), gauss_legendre_unit(p + 1).points)) {}

void ScalarReferenceElement::values(const Point2& x, std::span<double> out) const {
  const int m = p_ + 1;
  double lx[kMaxSpaceDegree + 1];
  double ly[kMaxSpaceDegree + 1];
  lagrange_.values(x[0], std::span<double>(lx, m));
  lagrange_.values(x[1], std::span<double>(ly, m));
  for (int b = 0; b < m; ++b) {
    for (int a = 0; a < m; ++a) out[a + m * b] = lx[a] * ly[b];
  }
}

FluxReferenceElement::FluxReferenceElement(int p)
    : p_(p),
      normal_((check_degree(p), normal_nodes(p))),
      tangential_(gauss_legendre_unit(p + 1).points) {}

void FluxReferenceElement::values(const Point2& x, Eigen::Ref<Eigen::Matrix2Xd> out) const {
  const int p = p_;
  double lx[kMaxSpaceDegree + 2], ly[kMaxSpaceDegree + 2];
  double tx[kMaxSpaceDegree + 1], ty[kMaxSpaceDegree + 1];
  normal_.values(x[0], std::span<double>(lx, p + 2));
  normal_.values(x[1], std::span<double>(ly, p + 2));
  tangential_.values(x[0], std::span<double>(tx, p + 1));
  tangential_.values(x[1], std::span<double>(ty, p + 1));

  out.setZero();
  const int ne = p + 1;
  for (int k = 0; k <= p; ++k) {
    out(1, 0 * ne + k) = -ly[0] * tx[k];
    out(0, 1 * ne + k) = lx[p + 1] * ty[k];
    out(1, 2 * ne + k) = ly[p + 1] * tx[k];
    out(0, 3 * ne + k) = -lx[0] * ty[k];
  }
  const int base_x = 4 * ne;
  const int base_y = base_x + p * (p + 1);
  for (int b = 0; b <= p; ++b) {
    for (int a = 1; a <= p; ++a) out(0, base_x + (a - 1) + p * b) = lx[a] * ty[b];
  }
  for (int b = 1; b <= p; ++b) {
    for (int a = 0; a <= p; ++a) out(1, base_y + a + (p + 1) * (b - 1)) = tx[a] * ly[b];
  }
}

void FluxReferenceElement::divergence(const Point2& x, std::span<double> out) const {
  const int p = p_;
  double dlx[kMaxSpaceDegree + 2], dly[kMaxSpaceDegree + 2];
  double tx[kMaxSpaceDegree + 1], ty[kMaxSpaceDegree + 1];
  normal_.derivatives(x[0], std::span<double>(dlx, p + 2));
  normal_.derivatives(x[1], std::span<double>(dly, p + 2));
  tangential_.values(x[0], std::span<double>(tx, p + 1));
  tangential_.values(x[1], std::span<double>(ty, p + 1));

  const int ne = p + 1;
  for (int k = 0; k <= p; ++k) {
    out[0 * ne + k] = -dly[0] * tx[k];
    out[1 * ne + k] = dlx[p + 1] * ty[k];
    out[2 * ne + k] = dly[p + 1] * tx[k];
    out[3 * ne + k] = -dlx[0] * ty[k];
  }
  const int base_x = 4 * ne;
  const int base_y = base_x + p * (p + 1);
  for (int b = 0; b <= p; ++b) {
    for (int a = 1; a <= p; ++a) out[base_x + (a - 1) + p * b] = dlx[a] * ty[b];
  }
  for (int b = 1; b <= p; ++b) {
    for (int a = 0; a <= p; ++a) out[base_y + a + (p + 1) * (b - 1)] = tx[a] * dly[b];
  }
}

ScalarSpace::ScalarSpace(std::shared_ptr<const QuadMesh> mesh, int p)
    : mesh_(std::move(mesh)), element_(p) {}

FluxSpace::FluxSpace(std::shared_ptr<const QuadMesh> mesh, int p)
    : mesh_(std::move(mesh)), element_(p) {
  const QuadMesh& m = *mesh_;
  const int ne = p + 1;
  const int n_int = element_.interior_dofs();
  const int n_loc = element_.size();
  dimension_ = m.num_edges() * ne + m.num_cells() * n_int;
  dofs_.resize(static_cast<std::size_t>(m.num_cells()) * n_loc);
  signs_.resize(dofs_.size());
  for (int k = 0; k < m.num_cells(); ++k) {
    int* dofs = dofs_.data() + static_cast<std::size_t>(k) * n_loc;
    double* signs = signs_.data() + static_cast<std::size_t>(k) * n_loc;
    for (int e = 0; e < 4; ++e) {
      const int g = m.cell_edges[k][e];
      const bool aligned = m.edge_aligned(k, e);
      const double sign = m.edge_sign(k, e);
      for (int node = 0; node < ne; ++node) {
        dofs[e * ne + node] = edge_dof(g, aligned ? node : p - node);
        signs[e * ne + node] = sign;
      }
    }
    for (int j = 0; j < n_int; ++j) {
      dofs[4 * ne + j] = m.num_edges() * ne + k * n_int + j;
      signs[4 * ne + j] = 1.0;
    }
  }
}

std::span<const int> FluxSpace::cell_dofs(int cell) const {
  const std::size_t n = dofs_per_cell();
  return std::span<const int>(dofs_).subspan(cell * n, n);
}

std::span<const double> FluxSpace::cell_signs(int cell) const {
  const std::size_t n = dofs_per_cell();
  return std::span<const double>(signs_).subspan(cell * n, n);
}

SpacePair build_pair(std::shared_ptr<const QuadMesh> mesh, int p) {
  check_degree(p);
  const auto report = validity_check(*mesh, default_rule(p));
  if (!report.valid) {
    throw InvalidMeshError(report.first_bad_cell,
                           "build_pair: cell " + std::to_string(report.first_bad_cell) +
                               " has nonpositive Jacobian determinant");
  }
  return SpacePair{ScalarSpace(mesh, p), FluxSpace(mesh, p)};
}

TensorRule2D default_rule(int p) { return tensor_gauss(p + 3); }

double eval_scalar(const ScalarSpace& space, const FeFunction& f, int cell, const Point2& ref) {
  if (f.kind != SpaceKind::Scalar) throw SpaceKindError("eval_scalar: function is not scalar");
  if (f.coefficients.size() != space.dimension()) {
    throw SpaceKindError("eval_scalar: coefficient length does not match the space");
  }
  const int n = space.dofs_per_cell();
  std::vector<double> phi(n);
  space.element().values(ref, phi);
  double value = 0.0;
  for (int i = 0; i < n; ++i) value += f.coefficients[space.dof(cell, i)] * phi[i];
  return value;
}

namespace {

Eigen::Vector2d reference_flux(const FluxSpace& space, const FeFunction& v, int cell,
                               const Point2& ref) {
  if (v.kind != SpaceKind::Flux) throw SpaceKindError("flux evaluation: function is not a flux");
  if (v.coefficients.size() != space.dimension()) {
    throw SpaceKindError("flux evaluation: coefficient length does not match the space");
  }
  const int n = space.dofs_per_cell();
  Eigen::Matrix2Xd phi(2, n);
  space.element().values(ref, phi);
  const auto dofs = space.cell_dofs(cell);
  const auto signs = space.cell_signs(cell);
  Eigen::Vector2d out = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) out += signs[i] * v.coefficients[dofs[i]] * phi.col(i);
  return out;
}

}  // namespace

Eigen::Vector2d eval_flux(const FluxSpace& space, const FeFunction& v, int cell,
                          const Point2& ref) {
  const Eigen::Vector2d vhat = reference_flux(space, v, cell, ref);
  const CellMap map(space.mesh(), cell);
  const Eigen::Matrix2d J = map.jacobian(ref);
  return J * vhat / J.determinant();
}

double eval_div_flux(const FluxSpace& space, const FeFunction& v, int cell, const Point2& ref) {
  if (v.kind != SpaceKind::Flux) throw SpaceKindError("eval_div_flux: function is not a flux");
  if (v.coefficients.size() != space.dimension()) {
    throw SpaceKindError("eval_div_flux: coefficient length does not match the space");
  }
  const int n = space.dofs_per_cell();
  std::vector<double> div(n);
  space.element().divergence(ref, div);
  const auto dofs = space.cell_dofs(cell);
  const auto signs = space.cell_signs(cell);
  double value = 0.0;
  for (int i = 0; i < n; ++i) value += signs[i] * v.coefficients[dofs[i]] * div[i];
  return value / CellMap(space.mesh(), cell).det(ref);
}

FeFunction l2_project_scalar(const ScalarField& g, const ScalarSpace& space) {
  return l2_project_scalar(g, space, default_rule(space.degree()));
}

FeFunction l2_project_scalar(const ScalarField& g, const ScalarSpace& space,
                             const TensorRule2D& rule) {
  const int n = space.dofs_per_cell();
  const auto nq = rule.size();
  Eigen::MatrixXd phi(n, nq);
  for (std::size_t q = 0; q < nq; ++q) {
    space.element().values(rule.points[q], std::span<double>(phi.col(q).data(), n));
  }
  FeFunction out{SpaceKind::Scalar, Eigen::VectorXd::Zero(space.dimension())};
  Eigen::MatrixXd mass(n, n);
  Eigen::VectorXd rhs(n);
  for (int k = 0; k < space.mesh().num_cells(); ++k) {
    const CellMap map(space.mesh(), k);
    mass.setZero();
    rhs.setZero();
    for (std::size_t q = 0; q < nq; ++q) {
      const double dx = rule.weights[q] * map.det(rule.points[q]);
      mass.noalias() += dx * phi.col(q) * phi.col(q).transpose();
      rhs += dx * g(map.map(rule.points[q])) * phi.col(q);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(mass);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("l2_project_scalar: singular local mass on cell " +
                               std::to_string(k));
    }
    out.coefficients.segment(space.dof(k, 0), n) = llt.solve(rhs);
  }
  return out;
}

FeFunction l2_project_flux(const VectorField& g, const FluxSpace& space) {
  return l2_project_flux(g, space, default_rule(space.degree()));
}

FeFunction l2_project_flux(const VectorField& g, const FluxSpace& space,
                           const TensorRule2D& rule) {
  const SparseMatrix mass =
      assemble_weighted_mass_flux(space, CoefficientField::constant(1.0), rule);
  const int n = space.dofs_per_cell();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(space.dimension());
  Eigen::Matrix2Xd phi(2, n);
  for (int k = 0; k < space.mesh().num_cells(); ++k) {
    const CellMap map(space.mesh(), k);
    const auto dofs = space.cell_dofs(k);
    const auto signs = space.cell_signs(k);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      // (J vhat / det J) . g * det J
      const Eigen::Vector2d jg =
          map.jacobian(rule.points[q]).transpose() * g(map.map(rule.points[q]));
      space.element().values(rule.points[q], phi);
      for (int i = 0; i < n; ++i) {
        rhs[dofs[i]] += rule.weights[q] * signs[i] * phi.col(i).dot(jg);
      }
    }
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(mass);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("l2_project_flux: flux mass factorization failed");
  }
  FeFunction out{SpaceKind::Flux, solver.solve(rhs)};
  if (solver.info() != Eigen::Success) throw std::runtime_error("l2_project_flux: solve failed");
  return out;
}

FeFunction rt_interpolate(const VectorField& g, const FluxSpace& space) {
  return rt_interpolate(g, space, space.degree() + 3);
}

FeFunction rt_interpolate(const VectorField& g, const FluxSpace& space, int moment_points) {
  const QuadMesh& mesh = space.mesh();
  const int p = space.degree();
  const int ne = p + 1;
  FeFunction out{SpaceKind::Flux, Eigen::VectorXd::Zero(space.dimension())};

  // Edge normal moments. The tangential Lagrange basis lives on the (p+1)
  // Gauss points, so its edge mass matrix is diag(gauss weights).
  const auto edge_rule = gauss_legendre_unit(moment_points);
  const auto node_weights = gauss_legendre_unit(p + 1).weights;
  const auto& lagrange = space.element().tangential_basis();
  std::vector<double> l(ne);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const auto& edge = mesh.edges[e];
    const Point2& a = mesh.vertices[edge.vertices[0]];
    const Point2& b = mesh.vertices[edge.vertices[1]];
    const Eigen::Vector2d n(edge.normal[0], edge.normal[1]);
    for (std::size_t q = 0; q < edge_rule.points.size(); ++q) {
      const double s = edge_rule.points[q];
      const Point2 x{a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])};
      const double flux = edge.length * g(x).dot(n);
      lagrange.values(s, l);
      for (int m = 0; m < ne; ++m) {
        out.coefficients[space.edge_dof(e, m)] += edge_rule.weights[q] * flux * l[m];
      }
    }
    for (int m = 0; m < ne; ++m) out.coefficients[space.edge_dof(e, m)] /= node_weights[m];
  }
  if (p == 0) return out;

  // Interior moments against Q^{p-1,p} x Q^{p,p-1} on the Piola pullback.
  const int n_loc = space.dofs_per_cell();
  const int n_edge = 4 * ne;
  const int n_int = space.element().interior_dofs();
  const LagrangeBasis1D lower(gauss_legendre_unit(p).points);
  const auto rule = tensor_gauss(moment_points);
  Eigen::MatrixXd gram(n_int, n_loc);
  Eigen::VectorXd moments(n_int);
  Eigen::Matrix2Xd phi(2, n_loc);
  Eigen::Matrix2Xd test(2, n_int);
  std::vector<double> lo_x(p), lo_y(p), t_x(ne), t_y(ne);
  Eigen::VectorXd c_edge(n_edge);
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const CellMap map(mesh, k);
    const auto dofs = space.cell_dofs(k);
    const auto signs = space.cell_signs(k);
    gram.setZero();
    moments.setZero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point2& xh = rule.points[q];
      lower.values(xh[0], lo_x);
      lower.values(xh[1], lo_y);
      lagrange.values(xh[0], t_x);
      lagrange.values(xh[1], t_y);
      test.setZero();
      for (int b = 0; b <= p; ++b) {
        for (int a = 0; a < p; ++a) test(0, a + p * b) = lo_x[a] * t_y[b];
      }
      for (int b = 0; b < p; ++b) {
        for (int a = 0; a <= p; ++a) test(1, p * (p + 1) + a + (p + 1) * b) = t_x[a] * lo_y[b];
      }
      const Eigen::Matrix2d J = map.jacobian(xh);
      const Eigen::Vector2d pulled = J.determinant() * J.inverse() * g(map.map(xh));
      space.element().values(xh, phi);
      gram.noalias() += rule.weights[q] * test.transpose() * phi;
      moments.noalias() += rule.weights[q] * test.transpose() * pulled;
    }
    for (int i = 0; i < n_edge; ++i) c_edge[i] = signs[i] * out.coefficients[dofs[i]];
    moments -= gram.leftCols(n_edge) * c_edge;
    const Eigen::VectorXd c_int = gram.rightCols(n_int).partialPivLu().solve(moments);
    for (int j = 0; j < n_int; ++j) out.coefficients[dofs[n_edge + j]] = c_int[j];
  }
  return out;
}

}  // namespace stmfem
