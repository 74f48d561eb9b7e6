#pragma once

// Structured triangulation of a rectangle times a uniform time partition.

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "nullctl/weights.hpp"

namespace nullctl {

struct Prism {
  int triangle;
  int slab;
};

struct Location {
  int prism = -1;
  int triangle = -1;
  int slab = -1;
  std::array<double, 3> bary{};  // barycentric coordinates in the triangle
  double tau = 0;                // affine time coordinate in [0,1]
};

struct SpaceTimeMesh {
  int nx = 0, ny = 0, nt = 0;
  double L1 = 0, L2 = 0, T = 0;
  double hx = 0, hy = 0, dt = 0;
  Rect omega;

  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<double> time_nodes;
  std::vector<Prism> prisms;
  std::vector<char> omega_flag;
  std::vector<std::array<int, 2>> edges;
  std::vector<char> boundary_edge_flags;

  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int num_slabs() const { return nt; }
  int num_prisms() const { return static_cast<int>(prisms.size()); }
  int vertex_index(int i, int j) const { return j * (nx + 1) + i; }
  int prism_index(int triangle, int slab) const { return slab * num_triangles() + triangle; }

  // Square (i,j) is split along v00-v11: kind 0 = (v00,v10,v11), kind 1 = (v00,v11,v01).
  static int triangle_kind(int tri) { return tri % 2; }
  std::array<int, 2> triangle_square(int tri) const {
    int sq = tri / 2;
    return {sq % nx, sq / nx};
  }

  double triangle_area(int tri) const {
    const auto& t = triangles[tri];
    Vec2 a = vertices[t[1]] - vertices[t[0]], b = vertices[t[2]] - vertices[t[0]];
    return 0.5 * std::abs(a.x() * b.y() - a.y() * b.x());
  }

  Vec2 centroid(int tri) const {
    const auto& t = triangles[tri];
    return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
  }

  bool on_boundary(const Vec2& p) const {
    double tx = 1e-12 * L1, ty = 1e-12 * L2;
    return p.x() <= tx || p.x() >= L1 - tx || p.y() <= ty || p.y() >= L2 - ty;
  }
};

namespace detail {

inline bool on_grid(double v, double h) {
  double q = v / h;
  return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::abs(q));
}

// Cell index along one axis: points on a grid line go to the lower cell.
inline int axis_cell(double v, double h, int n) {
  double q = v / h;
  double r = std::round(q);
  if (std::abs(q - r) <= 1e-12 * std::max(1.0, std::abs(q))) q = r;
  int c = static_cast<int>(std::ceil(q)) - 1;
  return std::clamp(c, 0, n - 1);
}

}  // namespace detail

inline SpaceTimeMesh build_mesh(int nx, int ny, int nt, double L1, double L2, double T, Rect omega) {
  if (nx < 1 || ny < 1 || nt < 1) throw std::invalid_argument("mesh: cell counts must be >= 1");
  if (!(L1 > 0) || !(L2 > 0) || !(T > 0)) throw std::invalid_argument("mesh: extents must be positive");
  if (!(omega.x1 > omega.x0) || !(omega.y1 > omega.y0))
    throw std::invalid_argument("mesh: control region must have positive area");
  double tol = 1e-12;
  if (omega.x0 < -tol * L1 || omega.x1 > L1 * (1 + tol) || omega.y0 < -tol * L2 || omega.y1 > L2 * (1 + tol))
    throw std::invalid_argument("mesh: control region must lie inside the domain");

  SpaceTimeMesh m;
  m.nx = nx;
  m.ny = ny;
  m.nt = nt;
  m.L1 = L1;
  m.L2 = L2;
  m.T = T;
  m.hx = L1 / nx;
  m.hy = L2 / ny;
  m.dt = T / nt;
  m.omega = omega;
  if (!detail::on_grid(omega.x0, m.hx) || !detail::on_grid(omega.x1, m.hx) ||
      !detail::on_grid(omega.y0, m.hy) || !detail::on_grid(omega.y1, m.hy))
    throw std::invalid_argument("mesh: control region corners must lie on grid lines");

  m.vertices.reserve((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.vertices.emplace_back(i == nx ? L1 : i * m.hx, j == ny ? L2 : j * m.hy);

  m.triangles.reserve(2 * nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int v00 = m.vertex_index(i, j), v10 = m.vertex_index(i + 1, j);
      int v11 = m.vertex_index(i + 1, j + 1), v01 = m.vertex_index(i, j + 1);
      m.triangles.push_back({v00, v10, v11});
      m.triangles.push_back({v00, v11, v01});
    }

  m.time_nodes.resize(nt + 1);
  for (int k = 0; k <= nt; ++k) m.time_nodes[k] = k == nt ? T : k * m.dt;

  for (int s = 0; s < nt; ++s)
    for (int t = 0; t < m.num_triangles(); ++t) m.prisms.push_back({t, s});

  m.omega_flag.resize(m.triangles.size());
  for (int t = 0; t < m.num_triangles(); ++t) m.omega_flag[t] = omega.strictly_contains(m.centroid(t));

  // Edges: horizontal, vertical, diagonal per square, in a fixed order.
  auto add_edge = [&](int a, int b) {
    m.edges.push_back({a, b});
    m.boundary_edge_flags.push_back(m.on_boundary(m.vertices[a]) && m.on_boundary(m.vertices[b]) &&
                                    m.on_boundary(0.5 * (m.vertices[a] + m.vertices[b])));
  };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i) add_edge(m.vertex_index(i, j), m.vertex_index(i + 1, j));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i) add_edge(m.vertex_index(i, j), m.vertex_index(i, j + 1));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) add_edge(m.vertex_index(i, j), m.vertex_index(i + 1, j + 1));
  return m;
}

// Local coordinates (xi, eta) of x in the unit square cell (i,j), and the triangle.
inline int locate_triangle(const SpaceTimeMesh& m, const Vec2& x, std::array<double, 3>& bary) {
  double tx = 1e-10 * m.L1, ty = 1e-10 * m.L2;
  if (x.x() < -tx || x.x() > m.L1 + tx || x.y() < -ty || x.y() > m.L2 + ty)
    throw std::out_of_range("locate: point outside the spatial domain");
  int i = detail::axis_cell(x.x(), m.hx, m.nx);
  int j = detail::axis_cell(x.y(), m.hy, m.ny);
  double xi = (x.x() - i * m.hx) / m.hx, eta = (x.y() - j * m.hy) / m.hy;
  int kind = eta <= xi ? 0 : 1;
  if (kind == 0)
    bary = {1 - xi, xi - eta, eta};  // (v00, v10, v11)
  else
    bary = {1 - eta, xi, eta - xi};  // (v00, v11, v01)
  return 2 * (j * m.nx + i) + kind;
}

inline Location locate(const SpaceTimeMesh& m, const Vec2& x, double t) {
  double tt = 1e-10 * m.T;
  if (t < -tt || t > m.T + tt) throw std::out_of_range("locate: time outside [0,T]");
  Location loc;
  loc.triangle = locate_triangle(m, x, loc.bary);
  loc.slab = detail::axis_cell(t, m.dt, m.nt);
  loc.tau = (t - m.time_nodes[loc.slab]) / m.dt;
  loc.prism = m.prism_index(loc.triangle, loc.slab);
  return loc;
}

inline void dump_mesh(const SpaceTimeMesh& m, std::ostream& os) {
  os << "# nx ny nt\n" << m.nx << " " << m.ny << " " << m.nt << "\n";
  os << "# vertices " << m.vertices.size() << "\n";
  for (size_t v = 0; v < m.vertices.size(); ++v) os << v << " " << m.vertices[v].x() << " " << m.vertices[v].y() << "\n";
  os << "# triangles " << m.triangles.size() << " (v0 v1 v2 omega)\n";
  for (size_t t = 0; t < m.triangles.size(); ++t)
    os << t << " " << m.triangles[t][0] << " " << m.triangles[t][1] << " " << m.triangles[t][2] << " "
       << int(m.omega_flag[t]) << "\n";
  os << "# edges " << m.edges.size() << " (v0 v1 boundary)\n";
  for (size_t e = 0; e < m.edges.size(); ++e)
    os << e << " " << m.edges[e][0] << " " << m.edges[e][1] << " " << int(m.boundary_edge_flags[e]) << "\n";
  os << "# time_nodes " << m.time_nodes.size() << "\n";
  for (double t : m.time_nodes) os << t << "\n";
}

}  // namespace nullctl
