#include <cmath>
#include <numeric>
#include <stdexcept>

#include <gtest/gtest.h>

#include "stmfem/quadrature.hpp"

using namespace stmfem;

namespace {

double monomial_integral_symmetric(int k) { return k % 2 == 1 ? 0.0 : 2.0 / (k + 1); }

}  // namespace

TEST(GaussLegendre, LowOrderNodesAndWeights) {
  const auto one = gauss_legendre(1);
  ASSERT_EQ(one.points.size(), 1u);
  EXPECT_NEAR(one.points[0], 0.0, 1e-15);
  EXPECT_NEAR(one.weights[0], 2.0, 1e-15);

  const auto two = gauss_legendre(2);
  EXPECT_NEAR(two.points[0], -1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(two.points[1], 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(two.weights[0], 1.0, 1e-15);

  const auto three = gauss_legendre(3);
  EXPECT_NEAR(three.points[0], -std::sqrt(0.6), 1e-15);
  EXPECT_NEAR(three.points[1], 0.0, 1e-15);
  EXPECT_NEAR(three.weights[0], 5.0 / 9.0, 1e-15);
  EXPECT_NEAR(three.weights[1], 8.0 / 9.0, 1e-15);
}

TEST(GaussLegendre, ExactForDegreeUpTo2nMinus1) {
  for (int n = 1; n <= kMaxRuleOrder; ++n) {
    const auto rule = gauss_legendre(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double sum = 0.0;
      for (int i = 0; i < n; ++i) sum += rule.weights[i] * std::pow(rule.points[i], k);
      EXPECT_NEAR(sum, monomial_integral_symmetric(k), 1e-14) << "n=" << n << " k=" << k;
    }
    // Degree 2n is not integrated exactly.
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rule.weights[i] * std::pow(rule.points[i], 2 * n);
    EXPECT_GT(std::abs(sum - monomial_integral_symmetric(2 * n)), 1e-8) << "n=" << n;
  }
}

TEST(GaussLegendre, PositiveSymmetricAscending) {
  for (int n = 1; n <= kMaxRuleOrder; ++n) {
    const auto rule = gauss_legendre(n);
    EXPECT_NEAR(std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0), 2.0, 1e-14);
    for (int i = 0; i < n; ++i) {
      EXPECT_GT(rule.weights[i], 0.0);
      EXPECT_NEAR(rule.points[i], -rule.points[n - 1 - i], 1e-15);
      EXPECT_NEAR(rule.weights[i], rule.weights[n - 1 - i], 1e-14);
      if (i > 0) EXPECT_LT(rule.points[i - 1], rule.points[i]);
    }
  }
}

TEST(GaussLegendre, RejectsOutOfRange) {
  EXPECT_THROW(gauss_legendre(0), std::invalid_argument);
  EXPECT_THROW(gauss_legendre(kMaxRuleOrder + 1), std::invalid_argument);
}

TEST(GaussLegendre, UnitIntervalMapping) {
  const auto rule = gauss_legendre_unit(3);
  EXPECT_EQ(rule.interval, Interval::Unit);
  EXPECT_DOUBLE_EQ(rule.length(), 1.0);
  EXPECT_NEAR(rule.points[0], 0.5 - 0.5 * std::sqrt(0.6), 1e-15);
  EXPECT_NEAR(rule.weights[1], 4.0 / 9.0, 1e-15);
  for (int k = 0; k <= 5; ++k) {
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) sum += rule.weights[i] * std::pow(rule.points[i], k);
    EXPECT_NEAR(sum, 1.0 / (k + 1), 1e-15);
  }
}

TEST(TensorRule, ExactForTensorMonomials) {
  for (int n = 1; n <= 6; ++n) {
    const auto rule = tensor_gauss(n);
    ASSERT_EQ(rule.size(), static_cast<std::size_t>(n * n));
    for (int a = 0; a <= 2 * n - 1; ++a) {
      for (int b = 0; b <= 2 * n - 1; ++b) {
        double sum = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q) {
          sum += rule.weights[q] * std::pow(rule.points[q][0], a) * std::pow(rule.points[q][1], b);
        }
        EXPECT_NEAR(sum, 1.0 / ((a + 1) * (b + 1)), 1e-14);
      }
    }
  }
}

TEST(TensorRule, AnisotropicOrderingAndValidation) {
  const auto rx = gauss_legendre_unit(2);
  const auto ry = gauss_legendre_unit(3);
  const auto rule = tensor(rx, ry);
  ASSERT_EQ(rule.size(), 6u);
  // index ix + nx * iy
  EXPECT_DOUBLE_EQ(rule.points[1][0], rx.points[1]);
  EXPECT_DOUBLE_EQ(rule.points[1][1], ry.points[0]);
  EXPECT_DOUBLE_EQ(rule.points[4][1], ry.points[2]);
  EXPECT_DOUBLE_EQ(rule.weights[3], rx.weights[1] * ry.weights[1]);
  EXPECT_THROW(tensor(gauss_legendre(2), ry), std::invalid_argument);
}
