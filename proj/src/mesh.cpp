#include "stmfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <utility>

namespace stmfem {

namespace {

// CCW traversal of local edge e runs corner kCcwFrom[e] -> kCcwTo[e].
constexpr std::array<int, 4> kCcwFrom{0, 1, 2, 3};
constexpr std::array<int, 4> kCcwTo{1, 2, 3, 0};

void update_edge_geometry(QuadMesh& mesh) {
  for (auto& e : mesh.edges) {
    const auto& cell = mesh.cells[e.cells[0]];
    const Point2& p = mesh.vertices[cell[kCcwFrom[e.local[0]]]];
    const Point2& q = mesh.vertices[cell[kCcwTo[e.local[0]]]];
    const double dx = q[0] - p[0];
    const double dy = q[1] - p[1];
    e.length = std::hypot(dx, dy);
    e.normal = {dy / e.length, -dx / e.length};
  }
}

void build_topology(QuadMesh& mesh) {
  std::map<std::pair<int, int>, int> lookup;
  mesh.edges.clear();
  mesh.cell_edges.assign(mesh.cells.size(), {-1, -1, -1, -1});
  for (int k = 0; k < mesh.num_cells(); ++k) {
    for (int le = 0; le < 4; ++le) {
      int a = mesh.cells[k][kCcwFrom[le]];
      int b = mesh.cells[k][kCcwTo[le]];
      if (a > b) std::swap(a, b);
      auto [it, inserted] = lookup.try_emplace({a, b}, mesh.num_edges());
      if (inserted) {
        MeshEdge e;
        e.vertices = {a, b};
        e.cells = {k, -1};
        e.local = {le, -1};
        mesh.edges.push_back(e);
      } else {
        auto& e = mesh.edges[it->second];
        if (e.cells[1] != -1) throw InvalidMeshError(k, "edge shared by more than two cells");
        e.cells[1] = k;
        e.local[1] = le;
      }
      mesh.cell_edges[k][le] = it->second;
    }
  }
  mesh.boundary_vertex.assign(mesh.vertices.size(), false);
  for (auto& e : mesh.edges) {
    e.boundary = e.cells[1] == -1;
    if (e.boundary) {
      mesh.boundary_vertex[e.vertices[0]] = true;
      mesh.boundary_vertex[e.vertices[1]] = true;
    }
  }
  update_edge_geometry(mesh);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double unit_double(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace

int QuadMesh::edge_sign(int cell, int local_edge) const {
  return edges[cell_edges[cell][local_edge]].cells[0] == cell ? 1 : -1;
}

bool QuadMesh::edge_aligned(int cell, int local_edge) const {
  const auto& e = edges[cell_edges[cell][local_edge]];
  return cells[cell][kEdgeStart[local_edge]] == e.vertices[0];
}

CellMap::CellMap(const QuadMesh& mesh, int cell) {
  for (int c = 0; c < 4; ++c) corners_[c] = mesh.vertices[mesh.cells.at(cell)[c]];
}

Point2 CellMap::map(const Point2& ref) const {
  const double x = ref[0];
  const double y = ref[1];
  const double w0 = (1 - x) * (1 - y);
  const double w1 = x * (1 - y);
  const double w2 = x * y;
  const double w3 = (1 - x) * y;
  return {w0 * corners_[0][0] + w1 * corners_[1][0] + w2 * corners_[2][0] + w3 * corners_[3][0],
          w0 * corners_[0][1] + w1 * corners_[1][1] + w2 * corners_[2][1] + w3 * corners_[3][1]};
}

Eigen::Matrix2d CellMap::jacobian(const Point2& ref) const {
  const double x = ref[0];
  const double y = ref[1];
  Eigen::Matrix2d J;
  for (int d = 0; d < 2; ++d) {
    J(d, 0) = (1 - y) * (corners_[1][d] - corners_[0][d]) + y * (corners_[2][d] - corners_[3][d]);
    J(d, 1) = (1 - x) * (corners_[3][d] - corners_[0][d]) + x * (corners_[2][d] - corners_[1][d]);
  }
  return J;
}

QuadMesh make_mesh(std::vector<Point2> vertices, std::vector<std::array<int, 4>> cells) {
  QuadMesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.cells = std::move(cells);
  for (int k = 0; k < mesh.num_cells(); ++k) {
    for (int v : mesh.cells[k]) {
      if (v < 0 || v >= mesh.num_vertices()) throw InvalidMeshError(k, "vertex index out of range");
    }
  }
  build_topology(mesh);
  const auto report = validity_check(mesh, tensor_gauss(4));
  if (!report.valid) throw InvalidMeshError(report.first_bad_cell, "make_mesh: folded cell");
  return mesh;
}

QuadMesh unit_square_mesh(int level) {
  if (level < 0) throw std::invalid_argument("unit_square_mesh: negative level");
  if (level > kMaxMeshLevel) {
    throw std::length_error("unit_square_mesh: level " + std::to_string(level) +
                            " exceeds the supported maximum " + std::to_string(kMaxMeshLevel));
  }
  const int n = 1 << level;
  QuadMesh mesh;
  mesh.level = level;
  mesh.vertices.reserve((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      mesh.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  }
  mesh.cells.reserve(n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v = i + (n + 1) * j;
      mesh.cells.push_back({v, v + 1, v + n + 2, v + n + 1});
    }
  }
  build_topology(mesh);
  return mesh;
}

std::uint64_t level_seed(std::uint64_t base_seed, int level) {
  return splitmix64(base_seed ^ (0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(level + 1)));
}

QuadMesh distort(const QuadMesh& mesh, double factor, std::uint64_t seed) {
  if (!(factor >= 0.0) || factor >= 0.5) {
    throw std::invalid_argument("distort: factor must lie in [0, 0.5)");
  }
  QuadMesh out = mesh;
  out.distortion = factor;
  if (factor == 0.0) return out;

  std::vector<double> shortest(mesh.vertices.size(), std::numeric_limits<double>::infinity());
  for (const auto& e : mesh.edges) {
    for (int v : e.vertices) shortest[v] = std::min(shortest[v], e.length);
  }

  std::mt19937_64 gen(splitmix64(seed));
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (mesh.boundary_vertex[v]) continue;
    const double angle = 2.0 * std::numbers::pi * unit_double(gen);
    const double radius = factor * shortest[v] * unit_double(gen);
    out.vertices[v][0] += radius * std::cos(angle);
    out.vertices[v][1] += radius * std::sin(angle);
  }
  update_edge_geometry(out);

  const auto report = validity_check(out, tensor_gauss(4));
  if (!report.valid) {
    throw InvalidMeshError(report.first_bad_cell,
                           "distort: cell " + std::to_string(report.first_bad_cell) +
                               " has nonpositive Jacobian determinant");
  }
  return out;
}

double h_max(const QuadMesh& mesh) {
  double h = 0.0;
  for (const auto& cell : mesh.cells) {
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        const auto& p = mesh.vertices[cell[a]];
        const auto& q = mesh.vertices[cell[b]];
        h = std::max(h, std::hypot(p[0] - q[0], p[1] - q[1]));
      }
    }
  }
  return h;
}

ValidityReport validity_check(const QuadMesh& mesh, const TensorRule2D& rule) {
  ValidityReport report;
  report.min_det = std::numeric_limits<double>::infinity();
  static constexpr std::array<Point2, 4> kCorners{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const CellMap map(mesh, k);
    auto check = [&](const Point2& x) {
      const double d = map.det(x);
      report.min_det = std::min(report.min_det, d);
      if (!(d > 0.0) && report.valid) {
        report.valid = false;
        report.first_bad_cell = k;
      }
    };
    for (const auto& x : rule.points) check(x);
    for (const auto& x : kCorners) check(x);
  }
  return report;
}

void write_mesh(std::ostream& os, const QuadMesh& mesh) {
  const auto old_precision = os.precision(17);
  os << "vertices " << mesh.num_vertices() << '\n';
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    os << "v " << v << ' ' << mesh.vertices[v][0] << ' ' << mesh.vertices[v][1] << '\n';
  }
  os << "cells " << mesh.num_cells() << '\n';
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const auto& c = mesh.cells[k];
    os << "c " << k << ' ' << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << c[3] << '\n';
  }
  os.precision(old_precision);
}

}  // namespace stmfem
