#pragma once

#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stmfem/mesh.hpp"
#include "stmfem/quadrature.hpp"
#include "stmfem/time_basis.hpp"

namespace stmfem {

using ScalarField = std::function<double(const Point2&)>;
using VectorField = std::function<Eigen::Vector2d(const Point2&)>;

/// Tensor Lagrange basis of Q^{p,p} on the Gauss points of [0,1]^2.
/// Local index i = a + (p+1) * b for x-node a and y-node b.
class ScalarReferenceElement {
 public:
  explicit ScalarReferenceElement(int p);
  int degree() const { return p_; }
  int size() const { return (p_ + 1) * (p_ + 1); }
  void values(const Point2& x, std::span<double> out) const;
  const LagrangeBasis1D& basis_1d() const { return lagrange_; }

 private:
  int p_;
  LagrangeBasis1D lagrange_;
};

/// Raviart-Thomas element of order p on [0,1]^2, shape space
/// Q^{p+1,p} x Q^{p,p+1}.
///
/// The normal direction uses Lagrange polynomials of degree p+1 on
/// {0, Gauss points, 1}; the tangential direction uses degree p on the
/// p+1 Gauss points. Local ordering:
///   [0, 4(p+1))              edge e, node k -> e*(p+1) + k; outward normal
///                            trace equals the tangential Lagrange function
///   [4(p+1), 4(p+1)+p(p+1))  x-component, interior x-node a = 1..p, y-node b
///   [..., + p(p+1))          y-component, x-node a, interior y-node b = 1..p
class FluxReferenceElement {
 public:
  explicit FluxReferenceElement(int p);
  int degree() const { return p_; }
  int size() const { return 2 * (p_ + 1) * (p_ + 2); }
  int edge_dofs() const { return p_ + 1; }
  int interior_dofs() const { return 2 * p_ * (p_ + 1); }
  /// Row 0 is the x-component, row 1 the y-component.
  void values(const Point2& x, Eigen::Ref<Eigen::Matrix2Xd> out) const;
  void divergence(const Point2& x, std::span<double> out) const;
  const LagrangeBasis1D& normal_basis() const { return normal_; }
  const LagrangeBasis1D& tangential_basis() const { return tangential_; }

 private:
  int p_;
  LagrangeBasis1D normal_;
  LagrangeBasis1D tangential_;
};

/// Discontinuous Q^{p,p} space W_h.
class ScalarSpace {
 public:
  ScalarSpace(std::shared_ptr<const QuadMesh> mesh, int p);

  const QuadMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const QuadMesh> mesh_ptr() const { return mesh_; }
  int degree() const { return element_.degree(); }
  int dofs_per_cell() const { return element_.size(); }
  int dimension() const { return mesh_->num_cells() * dofs_per_cell(); }
  int dof(int cell, int local) const { return cell * dofs_per_cell() + local; }
  const ScalarReferenceElement& element() const { return element_; }

 private:
  std::shared_ptr<const QuadMesh> mesh_;
  ScalarReferenceElement element_;
};

/// H(div)-conforming Raviart-Thomas space V_h with contravariant Piola map.
///
/// Global numbering: edge DoFs first (edge g, node m -> g*(p+1) + m, with the
/// node running along the global edge direction), then cell interiors.
/// Edge DoF values are normal fluxes along the global edge normal.
class FluxSpace {
 public:
  FluxSpace(std::shared_ptr<const QuadMesh> mesh, int p);

  const QuadMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const QuadMesh> mesh_ptr() const { return mesh_; }
  int degree() const { return element_.degree(); }
  int dofs_per_cell() const { return element_.size(); }
  int dimension() const { return dimension_; }
  std::span<const int> cell_dofs(int cell) const;
  std::span<const double> cell_signs(int cell) const;
  int edge_dof(int edge, int node) const { return edge * (degree() + 1) + node; }
  const FluxReferenceElement& element() const { return element_; }

 private:
  std::shared_ptr<const QuadMesh> mesh_;
  FluxReferenceElement element_;
  int dimension_ = 0;
  std::vector<int> dofs_;
  std::vector<double> signs_;
};

struct SpacePair {
  ScalarSpace scalar;
  FluxSpace flux;
  int total_dofs() const { return scalar.dimension() + flux.dimension(); }
};

inline constexpr int kMaxSpaceDegree = 4;

/// Builds (W_h, V_h). Throws std::invalid_argument for p outside [0, 4] and
/// InvalidMeshError for folded meshes.
SpacePair build_pair(std::shared_ptr<const QuadMesh> mesh, int p);

enum class SpaceKind { Scalar, Flux };

struct FeFunction {
  SpaceKind kind = SpaceKind::Scalar;
  Eigen::VectorXd coefficients;
};

/// Raised when a function is evaluated against a space of the other kind.
class SpaceKindError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double eval_scalar(const ScalarSpace& space, const FeFunction& f, int cell, const Point2& ref);
Eigen::Vector2d eval_flux(const FluxSpace& space, const FeFunction& v, int cell, const Point2& ref);
double eval_div_flux(const FluxSpace& space, const FeFunction& v, int cell, const Point2& ref);

/// Spatial rule used for assembly, projection and error integrals: (p+3)^2 Gauss points.
TensorRule2D default_rule(int p);

/// Cell-local L2 projection P_h.
FeFunction l2_project_scalar(const ScalarField& g, const ScalarSpace& space);
FeFunction l2_project_scalar(const ScalarField& g, const ScalarSpace& space,
                             const TensorRule2D& rule);

/// Global L2 projection onto V_h (sparse Cholesky on the flux mass matrix).
FeFunction l2_project_flux(const VectorField& g, const FluxSpace& space);
FeFunction l2_project_flux(const VectorField& g, const FluxSpace& space,
                           const TensorRule2D& rule);

/// Canonical RT interpolant Pi_h: edge normal moments against P_p and interior
/// moments against Q^{p-1,p} x Q^{p,p-1}, taken on the Piola pullback.
FeFunction rt_interpolate(const VectorField& g, const FluxSpace& space);
FeFunction rt_interpolate(const VectorField& g, const FluxSpace& space, int moment_points);

}  // namespace stmfem
