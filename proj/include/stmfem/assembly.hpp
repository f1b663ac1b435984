#pragma once

#include <functional>
#include <iosfwd>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "stmfem/quadrature.hpp"

namespace stmfem {

class ScalarSpace;
class FluxSpace;

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SpaceTimeField = std::function<double(const Point2&, double)>;

class InvalidCoefficientError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Symmetric positive definite diffusion tensor D(x) with ellipticity bounds
/// d_min |xi|^2 <= xi^T D xi <= d_max |xi|^2.
struct CoefficientField {
  std::function<Eigen::Matrix2d(const Point2&)> tensor;
  double d_min = 1.0;
  double d_max = 1.0;
  bool is_constant = false;

  Eigen::Matrix2d operator()(const Point2& x) const { return tensor(x); }

  static CoefficientField constant(double d);
  static CoefficientField constant(const Eigen::Matrix2d& d);
  /// Throws InvalidCoefficientError if D is not symmetric or its spectrum
  /// leaves [d_min, d_max] at x.
  void check(const Point2& x) const;
};

SparseMatrix assemble_mass_scalar(const ScalarSpace& space);
SparseMatrix assemble_mass_scalar(const ScalarSpace& space, const TensorRule2D& rule);

SparseMatrix assemble_weighted_mass_flux(const FluxSpace& space, const CoefficientField& d);
SparseMatrix assemble_weighted_mass_flux(const FluxSpace& space, const CoefficientField& d,
                                         const TensorRule2D& rule);

/// B(i_w, j_v) = <div v_j, w_i>; rows are scalar DoFs, columns flux DoFs.
SparseMatrix assemble_div_coupling(const FluxSpace& flux, const ScalarSpace& scalar);
SparseMatrix assemble_div_coupling(const FluxSpace& flux, const ScalarSpace& scalar,
                                   const TensorRule2D& rule);

/// Entries <f(., t), w_i>.
Eigen::VectorXd assemble_load(const ScalarSpace& space, const SpaceTimeField& f, double t);
Eigen::VectorXd assemble_load(const ScalarSpace& space, const SpaceTimeField& f, double t,
                              const TensorRule2D& rule);

/// Coordinate text dump: a "rows cols nnz" header, then "row col value" per entry.
void write_coordinate(std::ostream& os, const SparseMatrix& m);

}  // namespace stmfem
