#include "stmfem/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace stmfem {

namespace {

// Three-term recurrence; returns P_n(x) and P_n'(x).
std::pair<double, double> legendre_with_derivative(int n, double x) {
  double p_prev = 1.0;
  double p = x;
  for (int k = 2; k <= n; ++k) {
    const double p_next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
    p_prev = p;
    p = p_next;
  }
  if (n == 0) return {1.0, 0.0};
  const double dp = n * (x * p - p_prev) / (x * x - 1.0);
  return {p, dp};
}

}  // namespace

GaussRule1D gauss_legendre(int n) {
  if (n < 1 || n > kMaxRuleOrder) {
    throw std::invalid_argument("gauss_legendre: order " + std::to_string(n) +
                                " outside [1, " + std::to_string(kMaxRuleOrder) + "]");
  }
  GaussRule1D rule;
  rule.order = n;
  rule.interval = Interval::Symmetric;
  rule.points.assign(n, 0.0);
  rule.weights.assign(n, 0.0);

  // Roots are symmetric; compute the upper half by Newton from Chebyshev guesses.
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      const auto [p, d] = legendre_with_derivative(n, x);
      dp = d;
      const double dx = p / d;
      x -= dx;
      if (std::abs(dx) <= 1e-16) break;
    }
    dp = legendre_with_derivative(n, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.points[i] = -x;
    rule.points[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.points[n / 2] = 0.0;
  return rule;
}

GaussRule1D map_to_unit(const GaussRule1D& rule) {
  if (rule.interval == Interval::Unit) return rule;
  GaussRule1D out;
  out.order = rule.order;
  out.interval = Interval::Unit;
  out.points.reserve(rule.points.size());
  out.weights.reserve(rule.weights.size());
  for (double x : rule.points) out.points.push_back(0.5 * (x + 1.0));
  for (double w : rule.weights) out.weights.push_back(0.5 * w);
  return out;
}

GaussRule1D gauss_legendre_unit(int n) { return map_to_unit(gauss_legendre(n)); }

TensorRule2D tensor(const GaussRule1D& rx, const GaussRule1D& ry) {
  if (rx.interval != Interval::Unit || ry.interval != Interval::Unit) {
    throw std::invalid_argument("tensor: both rules must live on [0,1]");
  }
  TensorRule2D t;
  t.rule_x = rx;
  t.rule_y = ry;
  t.points.reserve(rx.points.size() * ry.points.size());
  t.weights.reserve(rx.points.size() * ry.points.size());
  for (std::size_t j = 0; j < ry.points.size(); ++j) {
    for (std::size_t i = 0; i < rx.points.size(); ++i) {
      t.points.push_back({rx.points[i], ry.points[j]});
      t.weights.push_back(rx.weights[i] * ry.weights[j]);
    }
  }
  return t;
}

TensorRule2D tensor_gauss(int n) {
  const auto r = gauss_legendre_unit(n);
  return tensor(r, r);
}

}  // namespace stmfem
