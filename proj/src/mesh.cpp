#include "crddme/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace crddme {

MeshParseError::MeshParseError(const std::string &what, int line, int column)
    : std::runtime_error(line > 0 ? "mesh parse error at line " + std::to_string(line) +
                                        ", column " + std::to_string(column) + ": " + what
                                  : "mesh error: " + what),
      line_(line), column_(column) {}

MeshTopologyError::MeshTopologyError(const std::string &what,
                                     std::vector<int> indices)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << what << " (";
        for (std::size_t k = 0; k < indices.size(); ++k)
          os << (k ? "," : "") << indices[k];
        os << ")";
        return os.str();
      }()),
      indices_(std::move(indices)) {}

namespace {

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

void fnv_mix(std::uint64_t &h, const void *data, std::size_t n) {
  const auto *p = static_cast<const unsigned char *>(data);
  for (std::size_t k = 0; k < n; ++k) {
    h ^= p[k];
    h *= 1099511628211ULL;
  }
}

} // namespace

Mesh Mesh::from_triangles(std::vector<Vec2> nodes,
                          std::vector<Triangle> triangles) {
  const int n = static_cast<int>(nodes.size());
  if (triangles.empty())
    throw MeshTopologyError("mesh has no triangles", {});

  double scale = 0.0;
  for (const Vec2 &p : nodes) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw MeshTopologyError("non-finite node coordinate",
                              {static_cast<int>(&p - nodes.data())});
    scale = std::max({scale, std::abs(p.x), std::abs(p.y)});
  }
  const double area_floor = 1e-14 * std::max(scale * scale, 1e-300);

  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    Triangle &tri = triangles[t];
    for (int v : tri) {
      if (v < 0 || v >= n)
        throw MeshTopologyError("triangle references missing node",
                                {static_cast<int>(t), v});
      used[static_cast<std::size_t>(v)] = 1;
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw MeshTopologyError("triangle repeats a node",
                              {static_cast<int>(t)});
    const double a = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
    if (std::abs(a) <= area_floor)
      throw MeshTopologyError("degenerate triangle", {static_cast<int>(t)});
    if (a < 0.0)
      std::swap(tri[1], tri[2]);
  }
  for (int v = 0; v < n; ++v)
    if (!used[static_cast<std::size_t>(v)])
      throw MeshTopologyError("orphan node", {v});

  Mesh mesh;
  mesh.nodes_ = std::move(nodes);
  mesh.triangles_ = std::move(triangles);

  std::unordered_map<std::uint64_t, int> index;
  index.reserve(mesh.triangles_.size() * 2);
  // Direction in which the first incident triangle traverses each edge; a
  // second CCW triangle must traverse it the other way.
  std::vector<int> first_from;
  for (std::size_t t = 0; t < mesh.triangles_.size(); ++t) {
    const Triangle &tri = mesh.triangles_[t];
    for (int l = 0; l < 3; ++l) {
      const int a = tri[l];
      const int b = tri[(l + 1) % 3];
      auto [it, inserted] =
          index.try_emplace(edge_key(a, b), static_cast<int>(mesh.edges_.size()));
      if (inserted) {
        Edge e;
        e.nodes = {std::min(a, b), std::max(a, b)};
        e.triangles = {static_cast<int>(t), -1};
        mesh.edges_.push_back(e);
        first_from.push_back(a);
      } else {
        Edge &e = mesh.edges_[static_cast<std::size_t>(it->second)];
        if (e.triangles[1] >= 0)
          throw MeshTopologyError("non-conforming edge shared by more than two triangles",
                                  {e.nodes[0], e.nodes[1]});
        if (first_from[static_cast<std::size_t>(it->second)] == a)
          throw MeshTopologyError("overlapping triangles on edge",
                                  {e.nodes[0], e.nodes[1]});
        e.triangles[1] = static_cast<int>(t);
      }
    }
  }
  for (std::size_t e = 0; e < mesh.edges_.size(); ++e)
    if (mesh.edges_[e].is_boundary())
      mesh.boundary_edges_.push_back(static_cast<int>(e));
  return mesh;
}

double Mesh::triangle_area(int t) const {
  const Triangle &tri = triangles_[static_cast<std::size_t>(t)];
  return signed_area(nodes_[tri[0]], nodes_[tri[1]], nodes_[tri[2]]);
}

double Mesh::total_area() const {
  double s = 0.0;
  for (int t = 0; t < num_triangles(); ++t)
    s += triangle_area(t);
  return s;
}

double Mesh::max_edge_length() const {
  double h = 0.0;
  for (const Edge &e : edges_)
    h = std::max(h, distance(node(e.nodes[0]), node(e.nodes[1])));
  return h;
}

std::uint64_t Mesh::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const Vec2 &p : nodes_) {
    fnv_mix(h, &p.x, sizeof(double));
    fnv_mix(h, &p.y, sizeof(double));
  }
  for (const Triangle &t : triangles_)
    fnv_mix(h, t.data(), sizeof(int) * 3);
  return h;
}

// ---------------------------------------------------------------------------
// Text I/O

namespace {

struct LineReader {
  std::istream &in;
  int line_no = 0;
  std::string line;

  // Next non-blank, non-comment line; false at EOF.
  bool next() {
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos)
        line.erase(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        return true;
    }
    return false;
  }
};

template <typename T>
std::vector<T> parse_fields(const LineReader &r, int expected) {
  std::vector<T> out;
  const char *begin = r.line.c_str();
  const char *p = begin;
  while (true) {
    while (*p == ' ' || *p == '\t' || *p == '\r')
      ++p;
    if (*p == '\0')
      break;
    const int column = static_cast<int>(p - begin) + 1;
    char *end = nullptr;
    if constexpr (std::is_integral_v<T>) {
      const long v = std::strtol(p, &end, 10);
      if (end == p || (*end != '\0' && *end != ' ' && *end != '\t' && *end != '\r'))
        throw MeshParseError("expected integer", r.line_no, column);
      out.push_back(static_cast<T>(v));
    } else {
      const double v = std::strtod(p, &end);
      if (end == p || (*end != '\0' && *end != ' ' && *end != '\t' && *end != '\r'))
        throw MeshParseError("expected number", r.line_no, column);
      out.push_back(v);
    }
    p = end;
  }
  if (static_cast<int>(out.size()) != expected)
    throw MeshParseError("expected " + std::to_string(expected) + " fields, got " +
                             std::to_string(out.size()),
                         r.line_no, 1);
  return out;
}

} // namespace

Mesh parse_mesh(std::istream &in) {
  LineReader r{in, 0, {}};
  if (!r.next())
    throw MeshParseError("empty mesh file", 1, 1);
  const auto header = parse_fields<long>(r, 2);
  if (header[0] < 3 || header[1] < 1)
    throw MeshParseError("need at least 3 nodes and 1 triangle", r.line_no, 1);

  std::vector<Vec2> nodes;
  nodes.reserve(static_cast<std::size_t>(header[0]));
  for (long k = 0; k < header[0]; ++k) {
    if (!r.next())
      throw MeshParseError("unexpected end of file in node block", r.line_no + 1, 1);
    const auto xy = parse_fields<double>(r, 2);
    nodes.push_back({xy[0], xy[1]});
  }
  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(header[1]));
  for (long k = 0; k < header[1]; ++k) {
    if (!r.next())
      throw MeshParseError("unexpected end of file in triangle block", r.line_no + 1, 1);
    const auto ijk = parse_fields<long>(r, 3);
    tris.push_back({static_cast<int>(ijk[0]), static_cast<int>(ijk[1]),
                    static_cast<int>(ijk[2])});
  }
  if (r.next())
    throw MeshParseError("trailing data after triangle block", r.line_no, 1);
  return Mesh::from_triangles(std::move(nodes), std::move(tris));
}

Mesh load_mesh(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw MeshParseError("cannot open mesh file: " + path, 0, 0);
  return parse_mesh(in);
}

void write_mesh(std::ostream &out, const Mesh &mesh) {
  out << mesh.num_nodes() << ' ' << mesh.num_triangles() << '\n';
  out << std::setprecision(17);
  for (const Vec2 &p : mesh.nodes())
    out << p.x << ' ' << p.y << '\n';
  for (const Triangle &t : mesh.triangles())
    out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

// ---------------------------------------------------------------------------
// Shapes and generation

bool shape_contains(const Shape &shape, Vec2 p, double tol) {
  if (const auto *sq = std::get_if<SquareShape>(&shape)) {
    const double h = 0.5 * sq->side + tol;
    return std::abs(p.x - sq->center.x) <= h && std::abs(p.y - sq->center.y) <= h;
  }
  const auto &d = std::get<DiskShape>(shape);
  return distance(p, d.center) <= d.radius + tol;
}

double shape_area(const Shape &shape) {
  if (const auto *sq = std::get_if<SquareShape>(&shape))
    return sq->side * sq->side;
  const auto &d = std::get<DiskShape>(shape);
  return std::numbers::pi * d.radius * d.radius;
}

namespace {

Mesh square_level0(const SquareShape &sq) {
  constexpr int cells = 4;
  const double h = sq.side / cells;
  const Vec2 lo = sq.center - Vec2{0.5 * sq.side, 0.5 * sq.side};
  std::vector<Vec2> nodes;
  for (int j = 0; j <= cells; ++j)
    for (int i = 0; i <= cells; ++i)
      nodes.push_back(lo + Vec2{i * h, j * h});
  auto id = [](int i, int j) { return j * (cells + 1) + i; };
  std::vector<Triangle> tris;
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      // Checkerboard diagonals give the union-jack pattern, symmetric under
      // the dihedral group of the square.
      if ((i + j) % 2 == 0) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }
  }
  return Mesh::from_triangles(std::move(nodes), std::move(tris));
}

Mesh disk_level0(const DiskShape &disk) {
  constexpr int rings = 2;
  std::vector<Vec2> nodes{disk.center};
  std::vector<int> ring_start{0};
  for (int m = 1; m <= rings; ++m) {
    ring_start.push_back(static_cast<int>(nodes.size()));
    const int count = 6 * m;
    const double r = disk.radius * m / rings;
    for (int q = 0; q < count; ++q) {
      const double th = 2.0 * std::numbers::pi * q / count;
      nodes.push_back(disk.center + Vec2{r * std::cos(th), r * std::sin(th)});
    }
  }
  std::vector<Triangle> tris;
  for (int q = 0; q < 6; ++q)
    tris.push_back({0, 1 + q, 1 + (q + 1) % 6});
  for (int m = 2; m <= rings; ++m) {
    const int n_in = 6 * (m - 1), n_out = 6 * m;
    const int s_in = ring_start[static_cast<std::size_t>(m - 1)];
    const int s_out = ring_start[static_cast<std::size_t>(m)];
    int p = 0, q = 0;
    while (p < n_in || q < n_out) {
      const double next_in = static_cast<double>(p + 1) / n_in;
      const double next_out = static_cast<double>(q + 1) / n_out;
      const int ip = s_in + p % n_in, oq = s_out + q % n_out;
      if (q < n_out && (p >= n_in || next_out <= next_in)) {
        tris.push_back({ip, oq, s_out + (q + 1) % n_out});
        ++q;
      } else {
        tris.push_back({ip, oq, s_in + (p + 1) % n_in});
        ++p;
      }
    }
  }
  return make_delaunay(Mesh::from_triangles(std::move(nodes), std::move(tris)));
}

Mesh project_boundary_to_circle(const Mesh &mesh, const DiskShape &disk) {
  std::vector<Vec2> nodes = mesh.nodes();
  for (int e : mesh.boundary_edges()) {
    for (int v : mesh.edges()[static_cast<std::size_t>(e)].nodes) {
      Vec2 &p = nodes[static_cast<std::size_t>(v)];
      const Vec2 d = p - disk.center;
      p = disk.center + (disk.radius / norm(d)) * d;
    }
  }
  return Mesh::from_triangles(std::move(nodes), mesh.triangles());
}

int opposite_vertex(const Triangle &t, const Edge &e) {
  for (int v : t)
    if (v != e.nodes[0] && v != e.nodes[1])
      return v;
  return -1;
}

double angle_at(Vec2 apex, Vec2 a, Vec2 b) {
  const Vec2 u = a - apex, v = b - apex;
  return std::atan2(std::abs(cross(u, v)), dot(u, v));
}

} // namespace

Mesh generate_mesh(const Shape &shape, int refinement_level) {
  if (refinement_level < 0)
    throw std::invalid_argument("refinement level must be non-negative");
  if (const auto *sq = std::get_if<SquareShape>(&shape)) {
    if (!(sq->side > 0.0))
      throw std::invalid_argument("square side must be positive");
    Mesh m = square_level0(*sq);
    for (int k = 0; k < refinement_level; ++k)
      m = refine_uniform(m);
    return m;
  }
  const auto &disk = std::get<DiskShape>(shape);
  if (!(disk.radius > 0.0))
    throw std::invalid_argument("disk radius must be positive");
  Mesh m = disk_level0(disk);
  for (int k = 0; k < refinement_level; ++k)
    m = make_delaunay(project_boundary_to_circle(refine_uniform(m), disk));
  return m;
}

Mesh refine_uniform(const Mesh &mesh) {
  const int n = mesh.num_nodes();
  std::vector<Vec2> nodes = mesh.nodes();
  nodes.reserve(static_cast<std::size_t>(n + mesh.num_edges()));
  std::unordered_map<std::uint64_t, int> mid;
  mid.reserve(static_cast<std::size_t>(mesh.num_edges()) * 2);
  for (const Edge &e : mesh.edges()) {
    mid.emplace(edge_key(e.nodes[0], e.nodes[1]), static_cast<int>(nodes.size()));
    nodes.push_back(0.5 * (mesh.node(e.nodes[0]) + mesh.node(e.nodes[1])));
  }
  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 4);
  for (const Triangle &t : mesh.triangles()) {
    const int ab = mid.at(edge_key(t[0], t[1]));
    const int bc = mid.at(edge_key(t[1], t[2]));
    const int ca = mid.at(edge_key(t[2], t[0]));
    tris.push_back({t[0], ab, ca});
    tris.push_back({ab, t[1], bc});
    tris.push_back({ca, bc, t[2]});
    tris.push_back({ab, bc, ca});
  }
  return Mesh::from_triangles(std::move(nodes), std::move(tris));
}

std::vector<int> non_delaunay_edges(const Mesh &mesh, double tol) {
  std::vector<int> bad;
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge &edge = mesh.edges()[static_cast<std::size_t>(e)];
    if (edge.is_boundary())
      continue;
    const Vec2 a = mesh.node(edge.nodes[0]), b = mesh.node(edge.nodes[1]);
    double sum = 0.0;
    for (int t : edge.triangles) {
      const int c = opposite_vertex(mesh.triangles()[static_cast<std::size_t>(t)], edge);
      sum += angle_at(mesh.node(c), a, b);
    }
    if (sum > std::numbers::pi + tol)
      bad.push_back(e);
  }
  return bad;
}

Mesh make_delaunay(const Mesh &mesh) {
  Mesh current = mesh;
  for (int pass = 0; pass < 1000; ++pass) {
    const std::vector<int> bad = non_delaunay_edges(current, 1e-12);
    if (bad.empty())
      return current;
    std::vector<Triangle> tris = current.triangles();
    std::vector<char> touched(tris.size(), 0);
    bool flipped = false;
    for (int e : bad) {
      const Edge &edge = current.edges()[static_cast<std::size_t>(e)];
      const auto t0 = static_cast<std::size_t>(edge.triangles[0]);
      const auto t1 = static_cast<std::size_t>(edge.triangles[1]);
      if (touched[t0] || touched[t1])
        continue;
      const int c = opposite_vertex(tris[t0], edge);
      const int d = opposite_vertex(tris[t1], edge);
      const int a = edge.nodes[0], b = edge.nodes[1];
      const Vec2 pa = current.node(a), pb = current.node(b);
      const Vec2 pc = current.node(c), pd = current.node(d);
      // The flip is only legal when the quadrilateral is strictly convex.
      if (signed_area(pc, pd, pa) * signed_area(pc, pd, pb) >= 0.0)
        continue;
      tris[t0] = {c, d, a};
      tris[t1] = {d, c, b};
      touched[t0] = touched[t1] = 1;
      flipped = true;
    }
    if (!flipped)
      return current;
    current = Mesh::from_triangles(current.nodes(), std::move(tris));
  }
  throw std::runtime_error("Delaunay edge flipping did not terminate");
}

// ---------------------------------------------------------------------------
// Dual cells

double DualCells::total_volume() const {
  double s = 0.0;
  for (double v : volumes)
    s += v;
  return s;
}

DualCells dual_cells(const Mesh &mesh) {
  const auto n = static_cast<std::size_t>(mesh.num_nodes());
  DualCells dc;
  dc.volumes.assign(n, 0.0);
  dc.sample_triangles.assign(n, {});
  dc.radius.assign(n, 0.0);
  dc.centroids = mesh.nodes();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Triangle &tri = mesh.triangles()[static_cast<std::size_t>(t)];
    const double third = mesh.triangle_area(t) / 3.0;
    const Vec2 g = (mesh.node(tri[0]) + mesh.node(tri[1]) + mesh.node(tri[2])) / 3.0;
    for (int l = 0; l < 3; ++l) {
      const auto v = static_cast<std::size_t>(tri[l]);
      const Vec2 p = mesh.node(tri[l]);
      const Vec2 next = mesh.node(tri[(l + 1) % 3]);
      const Vec2 prev = mesh.node(tri[(l + 2) % 3]);
      const Vec2 m_next = 0.5 * (p + next);
      const Vec2 m_prev = 0.5 * (p + prev);
      dc.volumes[v] += third;
      dc.sample_triangles[v].push_back({p, m_next, g});
      dc.sample_triangles[v].push_back({p, g, m_prev});
      dc.radius[v] = std::max({dc.radius[v], distance(p, g), distance(p, m_next),
                               distance(p, m_prev)});
    }
  }
  return dc;
}

// ---------------------------------------------------------------------------
// Point location

PointLocator::PointLocator(const Mesh &mesh) : mesh_(&mesh) {
  Vec2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  Vec2 hi{-lo.x, -lo.y};
  for (const Vec2 &p : mesh.nodes()) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const double mean_tri = mesh.total_area() / mesh.num_triangles();
  cell_ = 1.5 * std::sqrt(2.0 * mean_tri);
  lo_ = lo - Vec2{1e-9 * cell_, 1e-9 * cell_};
  nx_ = std::max(1, static_cast<int>(std::ceil((hi.x - lo_.x) / cell_)) + 1);
  ny_ = std::max(1, static_cast<int>(std::ceil((hi.y - lo_.y) / cell_)) + 1);

  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(nx_ * ny_));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Triangle &tri = mesh.triangles()[static_cast<std::size_t>(t)];
    Vec2 tl = mesh.node(tri[0]), th = tl;
    for (int v : tri) {
      const Vec2 p = mesh.node(v);
      tl = {std::min(tl.x, p.x), std::min(tl.y, p.y)};
      th = {std::max(th.x, p.x), std::max(th.y, p.y)};
    }
    const int x0 = static_cast<int>((tl.x - lo_.x) / cell_);
    const int x1 = std::min(nx_ - 1, static_cast<int>((th.x - lo_.x) / cell_));
    const int y0 = static_cast<int>((tl.y - lo_.y) / cell_);
    const int y1 = std::min(ny_ - 1, static_cast<int>((th.y - lo_.y) / cell_));
    for (int by = y0; by <= y1; ++by)
      for (int bx = x0; bx <= x1; ++bx)
        buckets[static_cast<std::size_t>(bucket_index(bx, by))].push_back(t);
  }
  bucket_start_.assign(buckets.size() + 1, 0);
  for (std::size_t b = 0; b < buckets.size(); ++b)
    bucket_start_[b + 1] = bucket_start_[b] + static_cast<int>(buckets[b].size());
  bucket_items_.reserve(static_cast<std::size_t>(bucket_start_.back()));
  for (const auto &b : buckets)
    bucket_items_.insert(bucket_items_.end(), b.begin(), b.end());
}

int PointLocator::locate_triangle(Vec2 p) const {
  const double fx = (p.x - lo_.x) / cell_;
  const double fy = (p.y - lo_.y) / cell_;
  if (!(fx >= 0.0 && fy >= 0.0 && fx < nx_ && fy < ny_))
    return -1;
  const int b = bucket_index(static_cast<int>(fx), static_cast<int>(fy));
  for (int k = bucket_start_[static_cast<std::size_t>(b)];
       k < bucket_start_[static_cast<std::size_t>(b) + 1]; ++k) {
    const int t = bucket_items_[static_cast<std::size_t>(k)];
    const Triangle &tri = mesh_->triangles()[static_cast<std::size_t>(t)];
    const Vec2 a = mesh_->node(tri[0]), bb = mesh_->node(tri[1]), c = mesh_->node(tri[2]);
    const double area = signed_area(a, bb, c);
    const double tol = -1e-12 * area;
    if (signed_area(p, bb, c) >= tol && signed_area(a, p, c) >= tol &&
        signed_area(a, bb, p) >= tol)
      return t;
  }
  return -1;
}

int PointLocator::locate_cell(Vec2 p) const {
  const int t = locate_triangle(p);
  if (t < 0)
    return -1;
  const Triangle &tri = mesh_->triangles()[static_cast<std::size_t>(t)];
  const Vec2 a = mesh_->node(tri[0]), b = mesh_->node(tri[1]), c = mesh_->node(tri[2]);
  const double l0 = signed_area(p, b, c);
  const double l1 = signed_area(a, p, c);
  const double l2 = signed_area(a, b, p);
  if (l0 >= l1 && l0 >= l2)
    return tri[0];
  return l1 >= l2 ? tri[1] : tri[2];
}

int PointLocator::locate_cell_or_nearest(Vec2 p) const {
  const int cell = locate_cell(p);
  if (cell >= 0)
    return cell;
  double best = std::numeric_limits<double>::max();
  int best_node = -1;
  for (int e : mesh_->boundary_edges()) {
    const Edge &edge = mesh_->edges()[static_cast<std::size_t>(e)];
    const Vec2 a = mesh_->node(edge.nodes[0]), b = mesh_->node(edge.nodes[1]);
    const Vec2 ab = b - a;
    const double s = std::clamp(dot(p - a, ab) / norm2(ab), 0.0, 1.0);
    const double d = norm2(p - (a + s * ab));
    if (d < best) {
      best = d;
      best_node = s < 0.5 ? edge.nodes[0] : edge.nodes[1];
    }
  }
  return best_node;
}

} // namespace crddme
