#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stmfem/assembly.hpp"
#include "stmfem/timeloop.hpp"

namespace stmfem {

using SpaceTimeVectorField = std::function<Eigen::Vector2d(const Point2&, double)>;

/// Closed-form solution of the model problem together with the data that
/// produces it: q = -D grad u and f = dt u + div q.
struct ManufacturedSolution {
  double omega = 0.0;
  CoefficientField diffusion = CoefficientField::constant(1.0);
  SpaceTimeField u;
  SpaceTimeVectorField grad_u;
  SpaceTimeVectorField q;
  SpaceTimeField div_q;
  SpaceTimeField f;

  /// Problem data on [0, final_time] with u0 = u(., 0).
  ProblemData problem(double final_time) const;
};

/// u(x,t) = sin(omega t) sin(pi x1) sin(pi x2) for a constant tensor D.
/// Throws std::invalid_argument if D is not constant.
ManufacturedSolution mms_standard(const CoefficientField& d, double omega);

/// u(x,t) = t^2 x1 (1-x1) x2 (1-x2), constant D. Lies in the discrete trial
/// spaces for r >= 2, p >= 2 on affine meshes.
ManufacturedSolution polynomial_solution(const CoefficientField& d);

struct ErrorQuadrature {
  int extra_time_points = 3;   // r + extra Gauss points per interval
  int extra_space_points = 3;  // (p + extra)^2 Gauss points per cell
};

struct SpaceTimeErrors {
  double u = 0.0;    // ||u - u_h||_{L2(I;L2)}
  double q_l2 = 0.0; // ||q - q_h||_{L2(I;L2)}
  double div_q = 0.0;  // ||div(q - q_h)||_{L2(I;L2)}
  double q_V() const { return std::hypot(q_l2, div_q); }
};

SpaceTimeErrors compute_errors(const SpaceTimeSolution& solution, const ManufacturedSolution& exact,
                               const ErrorQuadrature& quad = {});

double error_u(const SpaceTimeSolution& solution, const ManufacturedSolution& exact,
               const ErrorQuadrature& quad = {});
/// L2(I;V) norm: vector and divergence contributions summed before the root.
double error_q_V(const SpaceTimeSolution& solution, const ManufacturedSolution& exact,
                 const ErrorQuadrature& quad = {});

/// eoc[l] = log2(e[l-1] / e[l]); entry 0 and rows with a zero error are empty.
std::vector<std::optional<double>> eoc(std::span<const double> errors);

}  // namespace stmfem
