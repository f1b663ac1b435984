#pragma once

#include <array>
#include <vector>

namespace stmfem {

using Point2 = std::array<double, 2>;

enum class Interval { Symmetric, Unit };  // [-1,1] and [0,1]

/// One-dimensional Gauss-Legendre rule with n points.
struct GaussRule1D {
  int order = 0;
  std::vector<double> points;
  std::vector<double> weights;
  Interval interval = Interval::Symmetric;

  double length() const { return interval == Interval::Symmetric ? 2.0 : 1.0; }
};

/// Cartesian product of two rules on [0,1]. Point index is ix + nx * iy.
struct TensorRule2D {
  GaussRule1D rule_x;
  GaussRule1D rule_y;
  std::vector<Point2> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
};

inline constexpr int kMaxRuleOrder = 10;

/// Roots of the degree-n Legendre polynomial and their weights on [-1,1].
/// Throws std::invalid_argument unless 1 <= n <= kMaxRuleOrder.
GaussRule1D gauss_legendre(int n);

/// Affine pullback of a [-1,1] rule to [0,1]: t = (x+1)/2, w = w/2.
GaussRule1D map_to_unit(const GaussRule1D& rule);

/// Shorthand for map_to_unit(gauss_legendre(n)).
GaussRule1D gauss_legendre_unit(int n);

TensorRule2D tensor(const GaussRule1D& rx, const GaussRule1D& ry);

/// n x n tensor Gauss rule on the unit square.
TensorRule2D tensor_gauss(int n);

}  // namespace stmfem
