#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "stmfem/spaces.hpp"

using namespace stmfem;

namespace {

constexpr double kPi = std::numbers::pi;
const Point2 kRefCorner[4] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};

std::shared_ptr<const QuadMesh> uniform(int level) {
  return std::make_shared<const QuadMesh>(unit_square_mesh(level));
}

std::shared_ptr<const QuadMesh> distorted(int level, double factor, std::uint64_t seed) {
  return std::make_shared<const QuadMesh>(distort(unit_square_mesh(level), factor, seed));
}

Point2 on_edge(int local_edge, double s) {
  const auto& a = kRefCorner[kEdgeStart[local_edge]];
  const auto& b = kRefCorner[kEdgeEnd[local_edge]];
  return {a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])};
}

// Cell and reference coordinates of a physical point on a uniform mesh.
std::pair<int, Point2> locate(const QuadMesh& mesh, const Point2& x) {
  const int n = 1 << mesh.level;
  const int i = std::clamp(static_cast<int>(std::floor(x[0] * n)), 0, n - 1);
  const int j = std::clamp(static_cast<int>(std::floor(x[1] * n)), 0, n - 1);
  return {i + n * j, {x[0] * n - i, x[1] * n - j}};
}

FeFunction random_function(SpaceKind kind, int dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  FeFunction f{kind, Eigen::VectorXd(dim)};
  for (int i = 0; i < dim; ++i) f.coefficients[i] = dist(gen);
  return f;
}

double g_scalar(const Point2& x) { return std::exp(x[0]) * std::sin(2 * x[1]) + x[0] * x[0]; }
Eigen::Vector2d g_vector(const Point2& x) {
  return {std::sin(kPi * x[0]) * x[1] * x[1], std::cos(x[0] * x[1]) + x[0]};
}
double g_vector_div(const Point2& x) {
  return kPi * std::cos(kPi * x[0]) * x[1] * x[1] - x[0] * std::sin(x[0] * x[1]);
}

double l2_error_scalar(const ScalarSpace& s, const FeFunction& f, const ScalarField& g) {
  const auto rule = tensor_gauss(s.degree() + 4);
  double sum = 0.0;
  for (int k = 0; k < s.mesh().num_cells(); ++k) {
    const CellMap map(s.mesh(), k);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double e = g(map.map(rule.points[q])) - eval_scalar(s, f, k, rule.points[q]);
      sum += rule.weights[q] * map.det(rule.points[q]) * e * e;
    }
  }
  return std::sqrt(sum);
}

double l2_error_flux(const FluxSpace& s, const FeFunction& f, const VectorField& g) {
  const auto rule = tensor_gauss(s.degree() + 4);
  double sum = 0.0;
  for (int k = 0; k < s.mesh().num_cells(); ++k) {
    const CellMap map(s.mesh(), k);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Eigen::Vector2d e = g(map.map(rule.points[q])) - eval_flux(s, f, k, rule.points[q]);
      sum += rule.weights[q] * map.det(rule.points[q]) * e.squaredNorm();
    }
  }
  return std::sqrt(sum);
}

}  // namespace

TEST(Spaces, DofCountsMatchTableColumn) {
  const int expected[] = {33, 120, 456, 1776, 7008, 27840};
  for (int level = 0; level <= 5; ++level) {
    const auto pair = build_pair(uniform(level), 2);
    EXPECT_EQ(pair.total_dofs(), expected[level]) << "level " << level;
  }
}

TEST(Spaces, DimensionFormulas) {
  for (int p = 0; p <= 3; ++p) {
    for (int level = 0; level <= 3; ++level) {
      const auto mesh = uniform(level);
      const auto pair = build_pair(mesh, p);
      EXPECT_EQ(pair.scalar.dimension(), mesh->num_cells() * (p + 1) * (p + 1));
      EXPECT_EQ(pair.flux.dimension(),
                mesh->num_edges() * (p + 1) + mesh->num_cells() * 2 * p * (p + 1));
    }
  }
  EXPECT_THROW(build_pair(uniform(1), -1), std::invalid_argument);
  EXPECT_THROW(build_pair(uniform(1), kMaxSpaceDegree + 1), std::invalid_argument);
}

TEST(Spaces, ReferenceElementUnisolvence) {
  // Edge functions: outward normal trace on their own edge equals the
  // tangential Lagrange function; zero normal trace on the other edges.
  for (int p = 0; p <= 3; ++p) {
    const FluxReferenceElement el(p);
    Eigen::Matrix2Xd v(2, el.size());
    const Point2 outward[4] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};
    for (int e = 0; e < 4; ++e) {
      for (double s : {0.1, 0.47, 0.83}) {
        el.values(on_edge(e, s), v);
        for (int i = 0; i < el.size(); ++i) {
          const double flux = v(0, i) * outward[e][0] + v(1, i) * outward[e][1];
          double expected = 0.0;
          if (i / (p + 1) == e && i < 4 * (p + 1)) {
            expected = el.tangential_basis().value(i % (p + 1), s);
          }
          EXPECT_NEAR(flux, expected, 1e-13) << "p=" << p << " e=" << e << " i=" << i;
        }
      }
    }
  }
}

TEST(Spaces, NormalContinuity) {
  for (const auto& mesh : {uniform(2), distorted(2, 0.2, 5)}) {
    for (int p = 0; p <= 3; ++p) {
      const FluxSpace space(mesh, p);
      const auto v = random_function(SpaceKind::Flux, space.dimension(), 100 + p);
      std::mt19937_64 gen(3);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (const auto& e : mesh->edges) {
        if (e.boundary) continue;
        const auto& c0 = mesh->cells[e.cells[0]];
        const auto& c1 = mesh->cells[e.cells[1]];
        const bool same = c0[kEdgeStart[e.local[0]]] == c1[kEdgeStart[e.local[1]]];
        for (int t = 0; t < 5; ++t) {
          const double s = unit(gen);
          const Point2 r0 = on_edge(e.local[0], s);
          const Point2 r1 = on_edge(e.local[1], same ? s : 1.0 - s);
          const auto x0 = CellMap(*mesh, e.cells[0]).map(r0);
          const auto x1 = CellMap(*mesh, e.cells[1]).map(r1);
          ASSERT_NEAR(x0[0], x1[0], 1e-14);
          ASSERT_NEAR(x0[1], x1[1], 1e-14);
          const Eigen::Vector2d n(e.normal[0], e.normal[1]);
          const double f0 = eval_flux(space, v, e.cells[0], r0).dot(n);
          const double f1 = eval_flux(space, v, e.cells[1], r1).dot(n);
          EXPECT_NEAR(f0, f1, 1e-11);
        }
      }
    }
  }
}

TEST(Spaces, DivergenceTheorem) {
  for (const auto& mesh : {uniform(2), distorted(3, 0.25, 9)}) {
    for (int p = 0; p <= 3; ++p) {
      const FluxSpace space(mesh, p);
      const auto v = random_function(SpaceKind::Flux, space.dimension(), 7 + p);
      const auto rule = tensor_gauss(p + 3);
      double volume = 0.0;
      for (int k = 0; k < mesh->num_cells(); ++k) {
        const CellMap map(*mesh, k);
        for (std::size_t q = 0; q < rule.size(); ++q) {
          volume += rule.weights[q] * map.det(rule.points[q]) * eval_div_flux(space, v, k, rule.points[q]);
        }
      }
      const auto line = gauss_legendre_unit(p + 3);
      double boundary = 0.0;
      for (const auto& e : mesh->edges) {
        if (!e.boundary) continue;
        const Eigen::Vector2d n(e.normal[0], e.normal[1]);
        for (std::size_t q = 0; q < line.points.size(); ++q) {
          const auto r = on_edge(e.local[0], line.points[q]);
          boundary += line.weights[q] * e.length * eval_flux(space, v, e.cells[0], r).dot(n);
        }
      }
      EXPECT_NEAR(volume, boundary, 1e-11) << "p=" << p;
    }
  }
}

TEST(Spaces, DivergenceMatchesFiniteDifferences) {
  const auto mesh = uniform(2);
  const int n = 4;
  for (int p = 0; p <= 3; ++p) {
    const FluxSpace space(mesh, p);
    const auto v = random_function(SpaceKind::Flux, space.dimension(), 21);
    const double h = 1e-6;
    for (int k : {0, 5, 15}) {
      const Point2 r{0.37, 0.61};
      const Eigen::Vector2d dx = (eval_flux(space, v, k, {r[0] + h, r[1]}) - eval_flux(space, v, k, {r[0] - h, r[1]})) / (2 * h);
      const Eigen::Vector2d dy = (eval_flux(space, v, k, {r[0], r[1] + h}) - eval_flux(space, v, k, {r[0], r[1] - h})) / (2 * h);
      // d/dx = n d/dx_hat on the uniform grid
      EXPECT_NEAR(eval_div_flux(space, v, k, r), n * (dx[0] + dy[1]), 1e-6 * n);
    }
  }
}

TEST(Spaces, KindMismatchThrows) {
  const auto pair = build_pair(uniform(1), 1);
  const FeFunction u{SpaceKind::Scalar, Eigen::VectorXd::Zero(pair.scalar.dimension())};
  const FeFunction v{SpaceKind::Flux, Eigen::VectorXd::Zero(pair.flux.dimension())};
  EXPECT_THROW(eval_flux(pair.flux, u, 0, {0.5, 0.5}), SpaceKindError);
  EXPECT_THROW(eval_scalar(pair.scalar, v, 0, {0.5, 0.5}), SpaceKindError);
}

TEST(Projection, ScalarIdempotentAndOrthogonal) {
  const auto mesh = distorted(2, 0.1, 3);
  for (int p = 0; p <= 3; ++p) {
    const ScalarSpace space(mesh, p);
    const auto pg = l2_project_scalar(g_scalar, space);
    // Orthogonality with the projection's own rule.
    const auto rule = default_rule(p);
    double inner = 0.0;
    for (int k = 0; k < mesh->num_cells(); ++k) {
      const CellMap map(*mesh, k);
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const double ph = eval_scalar(space, pg, k, rule.points[q]);
        inner += rule.weights[q] * map.det(rule.points[q]) * (g_scalar(map.map(rule.points[q])) - ph) * ph;
      }
    }
    EXPECT_NEAR(inner, 0.0, 1e-11);
  }
  const auto umesh = uniform(2);
  const ScalarSpace space(umesh, 2);
  const auto pg = l2_project_scalar(g_scalar, space);
  const auto again = l2_project_scalar(
      [&](const Point2& x) {
        const auto [k, r] = locate(*umesh, x);
        return eval_scalar(space, pg, k, r);
      },
      space);
  EXPECT_LT((again.coefficients - pg.coefficients).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Projection, FluxIdempotentAndOrthogonal) {
  const auto mesh = uniform(2);
  for (int p = 0; p <= 2; ++p) {
    const FluxSpace space(mesh, p);
    const auto pg = l2_project_flux(g_vector, space);
    const auto as_field = [&](const Point2& x) -> Eigen::Vector2d {
      const auto [k, r] = locate(*mesh, x);
      return eval_flux(space, pg, k, r);
    };
    const auto again = l2_project_flux(as_field, space);
    EXPECT_LT((again.coefficients - pg.coefficients).lpNorm<Eigen::Infinity>(), 1e-11);
    const auto rule = default_rule(p);
    double inner = 0.0;
    for (int k = 0; k < mesh->num_cells(); ++k) {
      const CellMap map(*mesh, k);
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto ph = eval_flux(space, pg, k, rule.points[q]);
        inner += rule.weights[q] * map.det(rule.points[q]) * (g_vector(map.map(rule.points[q])) - ph).dot(ph);
      }
    }
    EXPECT_NEAR(inner, 0.0, 1e-11);
  }
}

TEST(Interpolant, ReproducesDiscreteFields) {
  const auto mesh = uniform(2);
  for (int p = 0; p <= 3; ++p) {
    const FluxSpace space(mesh, p);
    const auto v = random_function(SpaceKind::Flux, space.dimension(), 31 + p);
    const auto pi = rt_interpolate(
        [&](const Point2& x) -> Eigen::Vector2d {
          const auto [k, r] = locate(*mesh, x);
          return eval_flux(space, v, k, r);
        },
        space);
    EXPECT_LT((pi.coefficients - v.coefficients).lpNorm<Eigen::Infinity>(), 1e-11) << "p=" << p;
  }
}

TEST(Interpolant, LinearFieldHasConstantDivergence) {
  const auto identity = [](const Point2& x) -> Eigen::Vector2d { return {x[0], x[1]}; };
  for (int p = 0; p <= 3; ++p) {
    const auto mesh = p == 0 ? uniform(2) : distorted(2, 0.25, 17);
    const FluxSpace space(mesh, p);
    const auto pi = rt_interpolate(identity, space);
    const auto rule = tensor_gauss(p + 2);
    for (int k = 0; k < mesh->num_cells(); ++k) {
      for (const auto& r : rule.points) EXPECT_NEAR(eval_div_flux(space, pi, k, r), 2.0, 1e-11);
    }
  }
}

TEST(Interpolant, CommutingProperty) {
  // <div(Pi v - v), w_h> = 0 for every scalar basis function.
  const auto poly = [](const Point2& x) -> Eigen::Vector2d {
    return {x[0] * x[0] * x[0] * x[1] + x[1] * x[1], x[0] * x[0] * x[1] * x[1] - x[0]};
  };
  const auto poly_div = [](const Point2& x) { return 3 * x[0] * x[0] * x[1] + 2 * x[0] * x[0] * x[1]; };
  for (int p = 0; p <= 2; ++p) {
    for (const auto& mesh : {uniform(2), distorted(2, 0.25, 4)}) {
      const auto pair = build_pair(mesh, p);
      const auto pi = rt_interpolate(poly, pair.flux);
      const auto rule = tensor_gauss(p + 4);
      const int nw = pair.scalar.dofs_per_cell();
      std::vector<double> phi(nw);
      double worst = 0.0;
      for (int k = 0; k < mesh->num_cells(); ++k) {
        const CellMap map(*mesh, k);
        Eigen::VectorXd moments = Eigen::VectorXd::Zero(nw);
        for (std::size_t q = 0; q < rule.size(); ++q) {
          const auto& r = rule.points[q];
          pair.scalar.element().values(r, phi);
          const double d = eval_div_flux(pair.flux, pi, k, r) - poly_div(map.map(r));
          for (int i = 0; i < nw; ++i) moments[i] += rule.weights[q] * map.det(r) * d * phi[i];
        }
        worst = std::max(worst, moments.lpNorm<Eigen::Infinity>());
      }
      EXPECT_LT(worst, 1e-10) << "p=" << p;
    }
  }
}

TEST(Projection, ConvergenceRates) {
  for (int p = 0; p <= 2; ++p) {
    std::vector<double> es, ef, ei, ed;
    for (int level = 1; level <= 4; ++level) {
      const auto pair = build_pair(uniform(level), p);
      es.push_back(l2_error_scalar(pair.scalar, l2_project_scalar(g_scalar, pair.scalar), g_scalar));
      ef.push_back(l2_error_flux(pair.flux, l2_project_flux(g_vector, pair.flux), g_vector));
      const auto pi = rt_interpolate(g_vector, pair.flux);
      ei.push_back(l2_error_flux(pair.flux, pi, g_vector));
      const auto rule = tensor_gauss(p + 4);
      double sum = 0.0;
      for (int k = 0; k < pair.flux.mesh().num_cells(); ++k) {
        const CellMap map(pair.flux.mesh(), k);
        for (std::size_t q = 0; q < rule.size(); ++q) {
          const double e = g_vector_div(map.map(rule.points[q])) - eval_div_flux(pair.flux, pi, k, rule.points[q]);
          sum += rule.weights[q] * map.det(rule.points[q]) * e * e;
        }
      }
      ed.push_back(std::sqrt(sum));
    }
    for (std::size_t l = 1; l < es.size(); ++l) {
      EXPECT_GE(std::log2(es[l - 1] / es[l]), p + 0.9) << "P_h p=" << p;
      EXPECT_GE(std::log2(ef[l - 1] / ef[l]), p + 0.9) << "flux P_h p=" << p;
      EXPECT_GE(std::log2(ei[l - 1] / ei[l]), p + 0.9) << "Pi_h p=" << p;
      EXPECT_GE(std::log2(ed[l - 1] / ed[l]), p + 0.9) << "div Pi_h p=" << p;
    }
  }
}
