#ifndef CRDDME_MESH_HPP
#define CRDDME_MESH_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "crddme/geometry.hpp"

namespace crddme {

using Triangle = std::array<int, 3>;

/// Undirected mesh edge. `triangles[1]` is -1 on the boundary.
struct Edge {
  std::array<int, 2> nodes{};
  std::array<int, 2> triangles{-1, -1};

  bool is_boundary() const { return triangles[1] < 0; }
};

/// Raised for malformed mesh text. Carries the 1-based line and column; line
/// 0 when the file itself cannot be read.
class MeshParseError : public std::runtime_error {
public:
  MeshParseError(const std::string &what, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

private:
  int line_;
  int column_;
};

/// Raised when a triangulation violates conformity. `indices` names the
/// offending triangle, edge or node depending on the failure.
class MeshTopologyError : public std::runtime_error {
public:
  MeshTopologyError(const std::string &what, std::vector<int> indices);
  const std::vector<int> &indices() const { return indices_; }

private:
  std::vector<int> indices_;
};

/// Conforming 2D triangulation. Immutable once constructed; every instance
/// satisfies: positive (CCW) triangle areas, each edge shared by one or two
/// triangles, and no orphan nodes.
class Mesh {
public:
  Mesh() = default;

  /// Validates and builds edge connectivity. Clockwise triangles are
  /// reordered to CCW; degenerate triangles, edges with more than two
  /// incident triangles, and orphan nodes are rejected.
  static Mesh from_triangles(std::vector<Vec2> nodes,
                             std::vector<Triangle> triangles);

  const std::vector<Vec2> &nodes() const { return nodes_; }
  const std::vector<Triangle> &triangles() const { return triangles_; }
  const std::vector<Edge> &edges() const { return edges_; }
  /// Indices into edges() of edges with a single incident triangle.
  const std::vector<int> &boundary_edges() const { return boundary_edges_; }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  Vec2 node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  double triangle_area(int t) const;
  double total_area() const;
  double max_edge_length() const;

  /// Content hash over coordinates and connectivity (FNV-1a, 64 bit).
  std::uint64_t hash() const;

private:
  std::vector<Vec2> nodes_;
  std::vector<Triangle> triangles_;
  std::vector<Edge> edges_;
  std::vector<int> boundary_edges_;
};

// Text format: "N_nodes N_triangles", N_nodes lines "x y", N_triangles lines
// "i j k" with 0-based indices. Blank lines and '#' comments are skipped.
Mesh parse_mesh(std::istream &in);
Mesh load_mesh(const std::string &path);
void write_mesh(std::ostream &out, const Mesh &mesh);

struct SquareShape {
  Vec2 center;
  double side = 1.0;
};

struct DiskShape {
  Vec2 center;
  double radius = 1.0;
};

using Shape = std::variant<SquareShape, DiskShape>;

bool shape_contains(const Shape &shape, Vec2 p, double tol = 0.0);
double shape_area(const Shape &shape);

/// Structured Delaunay triangulation of a square or disk. Level 0 is a 4x4
/// union-jack grid (square) or a two-ring hexagonal fan (disk); level k has
/// 4^k times as many triangles. Disk boundary nodes are projected onto the
/// circle after every refinement and Delaunay is restored by edge flips.
Mesh generate_mesh(const Shape &shape, int refinement_level);

/// Splits every triangle into four congruent children through its edge
/// midpoints. Parent nodes keep their indices; midpoint nodes follow.
Mesh refine_uniform(const Mesh &mesh);

/// Lawson flips until every interior edge passes the empty-circumcircle
/// test. Node indices are unchanged.
Mesh make_delaunay(const Mesh &mesh);

/// Interior edges (indices into edges()) whose opposite angles sum to more
/// than pi + tol.
std::vector<int> non_delaunay_edges(const Mesh &mesh, double tol = 1e-12);

/// Barycentric dual cells: the voxels of the jump process.
struct DualCells {
  /// |V_i|, equal to the lumped mass sum over T containing i of |T|/3.
  std::vector<double> volumes;
  /// Fan decomposition of each dual polygon: triangles (node, edge
  /// midpoint, barycentre). Each has area |T|/6.
  std::vector<std::vector<std::array<Vec2, 3>>> sample_triangles;
  /// Largest distance from a node to any point of its dual polygon.
  std::vector<double> radius;
  /// Representative point of each cell (the mesh node).
  std::vector<Vec2> centroids;

  int size() const { return static_cast<int>(volumes.size()); }
  double total_volume() const;
};

DualCells dual_cells(const Mesh &mesh);

/// Bucketed point location on a mesh. Answers which triangle and which dual
/// cell contain a point; points outside the triangulation are assigned to
/// the dual cell owning the nearest boundary point.
class PointLocator {
public:
  explicit PointLocator(const Mesh &mesh);

  /// Triangle containing p, or -1 when p lies outside the triangulation.
  int locate_triangle(Vec2 p) const;
  /// Dual cell containing p (largest barycentric coordinate rule), or -1
  /// when p lies outside.
  int locate_cell(Vec2 p) const;
  /// Like locate_cell, but snaps outside points to the nearest boundary
  /// dual cell.
  int locate_cell_or_nearest(Vec2 p) const;

private:
  int bucket_index(int bx, int by) const { return by * nx_ + bx; }

  const Mesh *mesh_;
  Vec2 lo_;
  double cell_ = 1.0;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<int> bucket_start_;
  std::vector<int> bucket_items_;
};

} // namespace crddme

#endif
