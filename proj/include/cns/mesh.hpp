#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <istream>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cns/errors.hpp"

namespace cns {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Index = int;

inline constexpr Index kNoCell = -1;
inline constexpr Index kNoDof = -1;

/// Edge of the triangulation. `normal` is the unit normal oriented from
/// `owner` towards `neighbor` (outward from `owner` on the boundary).
struct Face {
  std::array<Index, 2> vertices{};
  Index owner = kNoCell;
  Index neighbor = kNoCell;
  Vec2 normal = Vec2::Zero();
  Vec2 midpoint = Vec2::Zero();
  double measure = 0.0;

  [[nodiscard]] bool internal() const { return neighbor != kNoCell; }
  [[nodiscard]] double diameter() const { return measure; }
};

/// Triangle with counter-clockwise vertices; local face i is opposite vertex i.
struct Cell {
  std::array<Index, 3> vertices{};
  std::array<Index, 3> faces{};
  double measure = 0.0;
  double diameter = 0.0;
  Vec2 centroid = Vec2::Zero();
};

struct AxisBox {
  Vec2 lower{0.0, 0.0};
  Vec2 upper{1.0, 1.0};
};

/// Regularity measures of a triangulation.
struct MeshQuality {
  double theta = 0.0;  ///< min over cells of inscribed-ball diameter / h_K
  double h = 0.0;      ///< max cell diameter
  /// Constants of the uniform-regularity assumption: h <= c h_K, h <= c h_sigma,
  /// and the two-sided bound of |sigma| h against |K|.
  struct Uniformity {
    double h_over_min_cell_diameter = 0.0;
    double h_over_min_face_diameter = 0.0;
    double min_face_h_over_area = 0.0;
    double max_face_h_over_area = 0.0;
  } uniformity;
};

class Mesh;
using MeshPtr = std::shared_ptr<const Mesh>;

/// Conforming 2D triangulation with face connectivity. Immutable once built.
class Mesh {
 public:
  [[nodiscard]] const std::vector<Vec2>& vertices() const { return vertices_; }
  [[nodiscard]] const std::vector<Cell>& cells() const { return cells_; }
  [[nodiscard]] const std::vector<Face>& faces() const { return faces_; }
  [[nodiscard]] const Cell& cell(Index k) const { return cells_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] const Face& face(Index f) const { return faces_[static_cast<std::size_t>(f)]; }
  [[nodiscard]] const Vec2& vertex(Index v) const { return vertices_[static_cast<std::size_t>(v)]; }

  [[nodiscard]] Index num_vertices() const { return static_cast<Index>(vertices_.size()); }
  [[nodiscard]] Index num_cells() const { return static_cast<Index>(cells_.size()); }
  [[nodiscard]] Index num_faces() const { return static_cast<Index>(faces_.size()); }
  [[nodiscard]] Index num_internal_faces() const { return static_cast<Index>(internal_faces_.size()); }
  [[nodiscard]] Index num_boundary_faces() const { return num_faces() - num_internal_faces(); }

  /// Internal faces in dof order.
  [[nodiscard]] const std::vector<Index>& internal_faces() const { return internal_faces_; }
  /// Velocity dof index of a face, kNoDof for boundary faces.
  [[nodiscard]] Index dof(Index face) const { return dof_of_face_[static_cast<std::size_t>(face)]; }

  /// Unit normal of `face` pointing out of `cell`.
  [[nodiscard]] Vec2 normal(Index face, Index cell) const {
    const Face& f = this->face(face);
    return f.owner == cell ? f.normal : Vec2(-f.normal);
  }

  /// The cell across `face` from `cell`, kNoCell on the boundary.
  [[nodiscard]] Index other_cell(Index face, Index cell) const {
    const Face& f = this->face(face);
    return f.owner == cell ? f.neighbor : f.owner;
  }

  [[nodiscard]] double h() const { return h_; }
  [[nodiscard]] double area() const {
    double a = 0.0;
    for (const Cell& c : cells_) a += c.measure;
    return a;
  }

  /// Barycentric coordinates of x with respect to cell k.
  [[nodiscard]] Eigen::Vector3d barycentric(Index k, const Vec2& x) const {
    const Cell& c = cell(k);
    const Vec2& a = vertex(c.vertices[0]);
    const Vec2& b = vertex(c.vertices[1]);
    const Vec2& d = vertex(c.vertices[2]);
    Mat2 m;
    m.col(0) = b - a;
    m.col(1) = d - a;
    const Vec2 st = m.partialPivLu().solve(x - a);
    return {1.0 - st[0] - st[1], st[0], st[1]};
  }

  [[nodiscard]] Vec2 point(Index k, const Eigen::Vector3d& bary) const {
    const Cell& c = cell(k);
    return bary[0] * vertex(c.vertices[0]) + bary[1] * vertex(c.vertices[1]) +
           bary[2] * vertex(c.vertices[2]);
  }

  /// Gradient of the barycentric coordinate of local vertex i on cell k.
  [[nodiscard]] Vec2 barycentric_gradient(Index k, int i) const {
    const Cell& c = cell(k);
    const Index f = c.faces[static_cast<std::size_t>(i)];
    return -face(f).measure / (2.0 * c.measure) * normal(f, k);
  }

  friend MeshPtr build_mesh(std::vector<Vec2> vertices, std::vector<std::array<Index, 3>> cells);

 private:
  Mesh() = default;

  std::vector<Vec2> vertices_;
  std::vector<Cell> cells_;
  std::vector<Face> faces_;
  std::vector<Index> internal_faces_;
  std::vector<Index> dof_of_face_;
  double h_ = 0.0;
};

namespace detail {

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Does segment [a,b] and [c,d] cross at a point other than a shared endpoint?
inline bool segments_conflict(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double tol) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  const double la = (b - a).norm();
  const double lc = (d - c).norm();
  const bool strictly = ((d1 > tol * la && d2 < -tol * la) || (d1 < -tol * la && d2 > tol * la)) &&
                        ((d3 > tol * lc && d4 < -tol * lc) || (d3 < -tol * lc && d4 > tol * lc));
  return strictly;
}

// Is p in the open interior of segment [a,b]?
inline bool on_open_segment(const Vec2& p, const Vec2& a, const Vec2& b, double tol) {
  const Vec2 ab = b - a;
  const double len = ab.norm();
  if (std::abs(cross(ab, p - a)) > tol * len * len) return false;
  const double s = ab.dot(p - a) / (len * len);
  return s > tol && s < 1.0 - tol;
}

}  // namespace detail

/// Build a mesh from vertex coordinates and vertex-index triples.
/// Orientation is normalized to counter-clockwise; conformity is verified.
inline MeshPtr build_mesh(std::vector<Vec2> vertices, std::vector<std::array<Index, 3>> cells) {
  auto mesh = std::shared_ptr<Mesh>(new Mesh());
  const auto nv = static_cast<Index>(vertices.size());
  if (cells.empty()) throw DegenerateCell("mesh has no cells");

  std::set<std::array<Index, 3>> seen;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    auto& tri = cells[k];
    for (Index v : tri) {
      if (v < 0 || v >= nv) throw NonConforming("cell " + std::to_string(k) + " has invalid vertex index");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw DegenerateCell("cell " + std::to_string(k) + " repeats a vertex");
    }
    auto key = tri;
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second) throw DuplicateCell("cell " + std::to_string(k) + " is duplicated");

    const Vec2& a = vertices[static_cast<std::size_t>(tri[0])];
    const Vec2& b = vertices[static_cast<std::size_t>(tri[1])];
    const Vec2& c = vertices[static_cast<std::size_t>(tri[2])];
    const double twice_area = detail::cross(b - a, c - a);
    const double scale = std::max({(b - a).squaredNorm(), (c - b).squaredNorm(), (a - c).squaredNorm()});
    if (std::abs(twice_area) <= 1e-12 * scale) {
      throw DegenerateCell("cell " + std::to_string(k) + " has zero area");
    }
    if (twice_area < 0.0) std::swap(tri[1], tri[2]);
  }

  // Edge table: sorted vertex pair -> (cell, local index) incidences.
  std::map<std::pair<Index, Index>, std::vector<std::pair<Index, int>>> edges;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    for (int i = 0; i < 3; ++i) {
      Index a = cells[k][static_cast<std::size_t>((i + 1) % 3)];
      Index b = cells[k][static_cast<std::size_t>((i + 2) % 3)];
      if (a > b) std::swap(a, b);
      auto& inc = edges[{a, b}];
      inc.emplace_back(static_cast<Index>(k), i);
      if (inc.size() > 2) throw NonConforming("edge shared by more than two cells");
    }
  }

  // Edges with a single incident cell must lie on the boundary: no vertex may sit
  // inside them and they may not cross each other.
  std::vector<std::pair<Index, Index>> lone;
  for (const auto& [key, inc] : edges) {
    if (inc.size() == 1) lone.push_back(key);
  }
  double min_edge = std::numeric_limits<double>::max();
  for (const auto& [key, inc] : edges) {
    min_edge = std::min(min_edge, (vertices[static_cast<std::size_t>(key.first)] -
                                   vertices[static_cast<std::size_t>(key.second)]).norm());
  }
  constexpr double tol = 1e-10;
  for (const auto& [a, b] : lone) {
    const Vec2& pa = vertices[static_cast<std::size_t>(a)];
    const Vec2& pb = vertices[static_cast<std::size_t>(b)];
    const Vec2 lo = pa.cwiseMin(pb).array() - tol * min_edge;
    const Vec2 hi = pa.cwiseMax(pb).array() + tol * min_edge;
    for (Index v = 0; v < nv; ++v) {
      if (v == a || v == b) continue;
      const Vec2& p = vertices[static_cast<std::size_t>(v)];
      if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) continue;
      if (detail::on_open_segment(p, pa, pb, tol)) {
        throw NonConforming("hanging node " + std::to_string(v) + " on edge (" + std::to_string(a) + "," +
                            std::to_string(b) + ")");
      }
    }
  }
  for (std::size_t i = 0; i < lone.size(); ++i) {
    const Vec2& a = vertices[static_cast<std::size_t>(lone[i].first)];
    const Vec2& b = vertices[static_cast<std::size_t>(lone[i].second)];
    for (std::size_t j = i + 1; j < lone.size(); ++j) {
      const Vec2& c = vertices[static_cast<std::size_t>(lone[j].first)];
      const Vec2& d = vertices[static_cast<std::size_t>(lone[j].second)];
      if (a.cwiseMax(b).x() < c.cwiseMin(d).x() || c.cwiseMax(d).x() < a.cwiseMin(b).x() ||
          a.cwiseMax(b).y() < c.cwiseMin(d).y() || c.cwiseMax(d).y() < a.cwiseMin(b).y()) {
        continue;
      }
      if (detail::segments_conflict(a, b, c, d, tol)) throw NonConforming("boundary edges cross");
    }
  }

  mesh->vertices_ = std::move(vertices);
  mesh->cells_.resize(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    Cell& c = mesh->cells_[k];
    c.vertices = cells[k];
    const Vec2& a = mesh->vertices_[static_cast<std::size_t>(c.vertices[0])];
    const Vec2& b = mesh->vertices_[static_cast<std::size_t>(c.vertices[1])];
    const Vec2& d = mesh->vertices_[static_cast<std::size_t>(c.vertices[2])];
    c.measure = 0.5 * detail::cross(b - a, d - a);
    c.diameter = std::max({(b - a).norm(), (d - b).norm(), (a - d).norm()});
    c.centroid = (a + b + d) / 3.0;
    mesh->h_ = std::max(mesh->h_, c.diameter);
  }

  mesh->faces_.reserve(edges.size());
  mesh->dof_of_face_.reserve(edges.size());
  for (const auto& [key, inc] : edges) {
    Face f;
    f.vertices = {key.first, key.second};
    const Vec2& a = mesh->vertices_[static_cast<std::size_t>(key.first)];
    const Vec2& b = mesh->vertices_[static_cast<std::size_t>(key.second)];
    f.measure = (b - a).norm();
    f.midpoint = 0.5 * (a + b);
    f.owner = inc[0].first;
    f.neighbor = inc.size() == 2 ? inc[1].first : kNoCell;
    const Vec2 t = (b - a) / f.measure;
    Vec2 n(t.y(), -t.x());
    if (n.dot(f.midpoint - mesh->cells_[static_cast<std::size_t>(f.owner)].centroid) < 0.0) n = -n;
    f.normal = n;
    const auto fid = static_cast<Index>(mesh->faces_.size());
    for (const auto& [k, i] : inc) mesh->cells_[static_cast<std::size_t>(k)].faces[static_cast<std::size_t>(i)] = fid;
    if (f.internal()) {
      mesh->dof_of_face_.push_back(static_cast<Index>(mesh->internal_faces_.size()));
      mesh->internal_faces_.push_back(fid);
    } else {
      mesh->dof_of_face_.push_back(kNoDof);
    }
    mesh->faces_.push_back(f);
  }
  return mesh;
}

/// Uniform right-triangle mesh: each rectangle split along its rising diagonal.
inline MeshPtr structured_triangulation(int nx, int ny, const AxisBox& box = {}) {
  if (nx < 1 || ny < 1) throw DegenerateCell("structured_triangulation needs nx, ny >= 1");
  std::vector<Vec2> vertices;
  vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  const Vec2 span = box.upper - box.lower;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      vertices.emplace_back(box.lower.x() + span.x() * i / nx, box.lower.y() + span.y() * j / ny);
    }
  }
  auto id = [nx](int i, int j) { return static_cast<Index>(j * (nx + 1) + i); };
  std::vector<std::array<Index, 3>> cells;
  cells.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return build_mesh(std::move(vertices), std::move(cells));
}

/// Split every triangle into four similar children through its edge midpoints.
inline MeshPtr refine_uniform(const Mesh& mesh) {
  std::vector<Vec2> vertices = mesh.vertices();
  std::vector<Index> mid(static_cast<std::size_t>(mesh.num_faces()));
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    mid[static_cast<std::size_t>(f)] = static_cast<Index>(vertices.size());
    vertices.push_back(mesh.face(f).midpoint);
  }
  std::vector<std::array<Index, 3>> cells;
  cells.reserve(static_cast<std::size_t>(4 * mesh.num_cells()));
  for (const Cell& c : mesh.cells()) {
    const Index a = c.vertices[0], b = c.vertices[1], d = c.vertices[2];
    // faces[i] is opposite vertex i
    const Index m_bd = mid[static_cast<std::size_t>(c.faces[0])];
    const Index m_da = mid[static_cast<std::size_t>(c.faces[1])];
    const Index m_ab = mid[static_cast<std::size_t>(c.faces[2])];
    cells.push_back({a, m_ab, m_da});
    cells.push_back({m_ab, b, m_bd});
    cells.push_back({m_da, m_bd, d});
    cells.push_back({m_ab, m_bd, m_da});
  }
  return build_mesh(std::move(vertices), std::move(cells));
}

inline MeshPtr refine_uniform(const MeshPtr& mesh) { return refine_uniform(*mesh); }

/// Inscribed-ball diameter over cell diameter for one cell.
inline double cell_theta(const Mesh& mesh, Index k) {
  const Cell& c = mesh.cell(k);
  double perimeter = 0.0;
  for (Index f : c.faces) perimeter += mesh.face(f).measure;
  const double inradius = 2.0 * c.measure / perimeter;
  return 2.0 * inradius / c.diameter;
}

inline MeshQuality quality(const Mesh& mesh) {
  MeshQuality q;
  q.theta = std::numeric_limits<double>::max();
  q.h = mesh.h();
  double min_hk = std::numeric_limits<double>::max();
  double min_hs = std::numeric_limits<double>::max();
  q.uniformity.min_face_h_over_area = std::numeric_limits<double>::max();
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const Cell& c = mesh.cell(k);
    q.theta = std::min(q.theta, cell_theta(mesh, k));
    min_hk = std::min(min_hk, c.diameter);
    for (Index f : c.faces) {
      const double ratio = mesh.face(f).measure * q.h / c.measure;
      q.uniformity.min_face_h_over_area = std::min(q.uniformity.min_face_h_over_area, ratio);
      q.uniformity.max_face_h_over_area = std::max(q.uniformity.max_face_h_over_area, ratio);
    }
  }
  for (const Face& f : mesh.faces()) min_hs = std::min(min_hs, f.measure);
  q.uniformity.h_over_min_cell_diameter = q.h / min_hk;
  q.uniformity.h_over_min_face_diameter = q.h / min_hs;
  return q;
}

/// Maximum over cells of |sum_sigma |sigma| n_{sigma,K}| / perimeter(K).
inline double max_closure_defect(const Mesh& mesh) {
  double worst = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    Vec2 sum = Vec2::Zero();
    double perimeter = 0.0;
    for (Index f : mesh.cell(k).faces) {
      sum += mesh.face(f).measure * mesh.normal(f, k);
      perimeter += mesh.face(f).measure;
    }
    worst = std::max(worst, sum.norm() / perimeter);
  }
  return worst;
}

/// ASCII mesh: vertex count, one "x y" line per vertex, cell count, one
/// 0-based "a b c" line per cell. Whitespace-separated; '#' starts a comment.
inline MeshPtr read_mesh_ascii(std::istream& in) {
  std::stringstream clean;
  std::string line;
  while (std::getline(in, line)) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    clean << line << '\n';
  }
  long long nv = 0;
  if (!(clean >> nv) || nv < 3) throw MeshFormatError("bad vertex count");
  std::vector<Vec2> vertices(static_cast<std::size_t>(nv));
  for (auto& v : vertices) {
    if (!(clean >> v.x() >> v.y())) throw MeshFormatError("truncated vertex list");
  }
  long long nc = 0;
  if (!(clean >> nc) || nc < 1) throw MeshFormatError("bad cell count");
  std::vector<std::array<Index, 3>> cells(static_cast<std::size_t>(nc));
  for (auto& c : cells) {
    if (!(clean >> c[0] >> c[1] >> c[2])) throw MeshFormatError("truncated cell list");
  }
  return build_mesh(std::move(vertices), std::move(cells));
}

inline MeshPtr read_mesh_ascii(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshFormatError("cannot open mesh file " + path);
  return read_mesh_ascii(in);
}

inline void write_mesh_ascii(std::ostream& out, const Mesh& mesh) {
  out.precision(17);
  out << mesh.num_vertices() << '\n';
  for (const Vec2& v : mesh.vertices()) out << v.x() << ' ' << v.y() << '\n';
  out << mesh.num_cells() << '\n';
  for (const Cell& c : mesh.cells()) out << c.vertices[0] << ' ' << c.vertices[1] << ' ' << c.vertices[2] << '\n';
}

/// Legacy-VTK ASCII unstructured grid of the bare mesh.
inline void write_mesh_vtk(std::ostream& out, const Mesh& mesh, const std::string& title = "mesh") {
  out.precision(17);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const Vec2& v : mesh.vertices()) out << v.x() << ' ' << v.y() << " 0\n";
  out << "CELLS " << mesh.num_cells() << ' ' << 4 * mesh.num_cells() << '\n';
  for (const Cell& c : mesh.cells()) out << "3 " << c.vertices[0] << ' ' << c.vertices[1] << ' ' << c.vertices[2] << '\n';
  out << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (Index k = 0; k < mesh.num_cells(); ++k) out << "5\n";
}

}  // namespace cns
