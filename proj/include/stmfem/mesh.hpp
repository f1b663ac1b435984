#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stmfem/quadrature.hpp"

namespace stmfem {

/// Raised when a cell map loses orientation (det J <= 0 somewhere).
class InvalidMeshError : public std::runtime_error {
 public:
  InvalidMeshError(int cell, const std::string& what)
      : std::runtime_error(what), cell_(cell) {}
  int cell() const { return cell_; }

 private:
  int cell_;
};

/// Local edge numbering on the reference square [0,1]^2 with corners
/// 0=(0,0), 1=(1,0), 2=(1,1), 3=(0,1):
///   0 bottom (y=0), 1 right (x=1), 2 top (y=1), 3 left (x=0).
/// Each local edge is parametrised by the reference coordinate running along
/// it, from kEdgeStart to kEdgeEnd.
inline constexpr std::array<int, 4> kEdgeStart{0, 1, 3, 0};
inline constexpr std::array<int, 4> kEdgeEnd{1, 2, 2, 3};

struct MeshEdge {
  std::array<int, 2> vertices{};  // ascending vertex index; edge parameter runs v[0] -> v[1]
  std::array<int, 2> cells{-1, -1};  // cells[0] < cells[1]; cells[1] == -1 on the boundary
  std::array<int, 2> local{-1, -1};  // local edge index inside cells[k]
  bool boundary = false;
  /// Unit normal pointing out of cells[0] (from the lower to the higher cell index).
  Point2 normal{};
  double length = 0.0;
};

/// Quadrilateral decomposition of the unit square.
struct QuadMesh {
  std::vector<Point2> vertices;
  std::vector<std::array<int, 4>> cells;  // counterclockwise
  std::vector<MeshEdge> edges;
  std::vector<std::array<int, 4>> cell_edges;  // global edge per local edge
  std::vector<bool> boundary_vertex;
  int level = 0;
  double distortion = 0.0;

  int num_cells() const { return static_cast<int>(cells.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_vertices() const { return static_cast<int>(vertices.size()); }

  /// +1 if the global edge normal of local edge e points out of the cell.
  int edge_sign(int cell, int local_edge) const;
  /// True if the local edge parameter runs along the global edge direction.
  bool edge_aligned(int cell, int local_edge) const;
};

/// Bilinear map T_K from the reference square onto one cell.
class CellMap {
 public:
  CellMap(const QuadMesh& mesh, int cell);
  explicit CellMap(const std::array<Point2, 4>& corners) : corners_(corners) {}

  Point2 map(const Point2& ref) const;
  /// Columns are dT/dx_hat and dT/dy_hat.
  Eigen::Matrix2d jacobian(const Point2& ref) const;
  double det(const Point2& ref) const { return jacobian(ref).determinant(); }
  const std::array<Point2, 4>& corners() const { return corners_; }

 private:
  std::array<Point2, 4> corners_;
};

inline CellMap cell_map(const QuadMesh& mesh, int cell) { return CellMap(mesh, cell); }

/// Mesh from raw vertices and counterclockwise cells; edges and boundary
/// flags are derived. Throws InvalidMeshError for folded cells or edges
/// shared by more than two cells.
QuadMesh make_mesh(std::vector<Point2> vertices, std::vector<std::array<int, 4>> cells);

inline constexpr int kMaxMeshLevel = 8;

/// Uniform (2^level)^2 grid. Throws std::length_error above kMaxMeshLevel.
QuadMesh unit_square_mesh(int level);

/// Moves every interior vertex by a random vector: angle uniform in [0, 2pi),
/// magnitude uniform in [0, factor * shortest incident edge). Vertices are
/// visited in ascending index order; per vertex the angle is drawn first.
/// The generator is mt19937_64 seeded with splitmix64(seed), and doubles are
/// formed from the top 53 bits. Throws InvalidMeshError if a cell folds.
QuadMesh distort(const QuadMesh& mesh, double factor, std::uint64_t seed);

/// Seed used for refinement level `level` of a distorted sweep.
std::uint64_t level_seed(std::uint64_t base_seed, int level);

/// Largest corner-to-corner distance over all cells.
double h_max(const QuadMesh& mesh);

struct ValidityReport {
  bool valid = true;
  int first_bad_cell = -1;
  double min_det = 0.0;
};

/// det J > 0 at every rule point and every corner of every cell.
ValidityReport validity_check(const QuadMesh& mesh, const TensorRule2D& rule);

/// Plain-text listing:
///   vertices <count>
///   v <index> <x> <y>          (one per vertex)
///   cells <count>
///   c <index> <v0> <v1> <v2> <v3>
void write_mesh(std::ostream& os, const QuadMesh& mesh);

}  // namespace stmfem
