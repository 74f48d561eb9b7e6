#include <gtest/gtest.h>

#include <sstream>

#include "nullctl/mesh.hpp"

using namespace nullctl;

TEST(BuildMesh, SingleCellFullControl) {
  auto m = build_mesh(1, 1, 1, 1.0, 1.0, 1.0, Rect{0, 1, 0, 1});
  EXPECT_EQ(m.num_triangles(), 2);
  EXPECT_EQ(m.num_prisms(), 2);
  for (char f : m.omega_flag) EXPECT_TRUE(f);
}

TEST(BuildMesh, Counts) {
  auto m = build_mesh(8, 8, 16, 1.0, 1.0, 1.0, Rect{0.25, 0.5, 0.25, 0.5});
  EXPECT_EQ(m.num_triangles(), 128);
  EXPECT_EQ(m.num_prisms(), 2048);
  EXPECT_EQ(m.time_nodes.size(), 17u);
  EXPECT_EQ(m.time_nodes.front(), 0.0);
  EXPECT_EQ(m.time_nodes.back(), 1.0);
}

TEST(BuildMesh, ControlRegionCellCount) {
  auto m = build_mesh(10, 10, 4, 1.0, 1.0, 1.0, Rect{0.2, 0.6, 0.2, 0.6});
  int n = 0;
  double area = 0;
  for (int t = 0; t < m.num_triangles(); ++t)
    if (m.omega_flag[t]) {
      ++n;
      area += m.triangle_area(t);
    }
  EXPECT_EQ(n, 32);
  EXPECT_NEAR(area, 0.16, 1e-14);
}

TEST(BuildMesh, AreasTileDomain) {
  auto m = build_mesh(7, 5, 2, 3.0, 1.3, 1.0, Rect{0, 3.0 * 3 / 7, 0, 1.3});
  double area = 0;
  for (int t = 0; t < m.num_triangles(); ++t) area += m.triangle_area(t);
  EXPECT_NEAR(area, 3.0 * 1.3, 1e-12 * 3.9);
}

TEST(BuildMesh, RejectsUnalignedControlRegion) {
  EXPECT_THROW(build_mesh(8, 8, 4, 1.0, 1.0, 1.0, Rect{0.2, 0.6, 0.2, 0.6}), std::invalid_argument);
  EXPECT_THROW(build_mesh(0, 8, 4, 1.0, 1.0, 1.0, Rect{0, 1, 0, 1}), std::invalid_argument);
  EXPECT_THROW(build_mesh(4, 4, 4, 1.0, 1.0, 1.0, Rect{0.5, 1.5, 0, 1}), std::invalid_argument);
}

TEST(BuildMesh, PiScaledControlRegionAligned) {
  const double pi = 3.14159265358979323846;
  auto m = build_mesh(6, 6, 10, pi, pi, 1.0, Rect{pi / 3, 2 * pi / 3, pi / 3, 2 * pi / 3});
  int n = 0;
  for (char f : m.omega_flag) n += f;
  EXPECT_EQ(n, 8);
}

TEST(BuildMesh, BoundaryEdgeFlags) {
  auto m = build_mesh(4, 3, 1, 2.0, 1.0, 1.0, Rect{0, 1, 0, 1});
  int nb = 0;
  for (size_t e = 0; e < m.edges.size(); ++e) {
    bool both = m.on_boundary(m.vertices[m.edges[e][0]]) && m.on_boundary(m.vertices[m.edges[e][1]]);
    if (m.boundary_edge_flags[e]) {
      EXPECT_TRUE(both);
      ++nb;
    }
  }
  EXPECT_EQ(nb, 2 * (4 + 3));
}

TEST(BuildMesh, Deterministic) {
  auto a = build_mesh(5, 4, 3, 1.0, 2.0, 0.5, Rect{0.2, 0.6, 0.5, 1.0});
  auto b = build_mesh(5, 4, 3, 1.0, 2.0, 0.5, Rect{0.2, 0.6, 0.5, 1.0});
  std::ostringstream sa, sb;
  dump_mesh(a, sa);
  dump_mesh(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  ASSERT_EQ(a.vertices.size(), b.vertices.size());
  for (size_t v = 0; v < a.vertices.size(); ++v) EXPECT_TRUE(a.vertices[v] == b.vertices[v]);
}

TEST(Locate, CentroidMapsToOwnCell) {
  auto m = build_mesh(4, 3, 5, 2.0, 1.0, 1.0, Rect{0, 1, 0, 1});
  for (int p = 0; p < m.num_prisms(); ++p) {
    auto [tri, slab] = m.prisms[p];
    double t = 0.5 * (m.time_nodes[slab] + m.time_nodes[slab + 1]);
    Location loc = locate(m, m.centroid(tri), t);
    EXPECT_EQ(loc.prism, p);
    for (double b : loc.bary) EXPECT_NEAR(b, 1.0 / 3, 1e-12);
    EXPECT_NEAR(loc.tau, 0.5, 1e-12);
  }
}

TEST(Locate, SlabInterfaceGoesToEarlierSlab) {
  auto m = build_mesh(2, 2, 4, 1.0, 1.0, 1.0, Rect{0, 1, 0, 1});
  Location loc = locate(m, Vec2(0.3, 0.1), 0.5);
  EXPECT_EQ(loc.slab, 1);
  EXPECT_NEAR(loc.tau, 1.0, 1e-14);
  EXPECT_EQ(locate(m, Vec2(0.3, 0.1), 0.0).slab, 0);
  EXPECT_EQ(locate(m, Vec2(0.3, 0.1), 1.0).slab, 3);
}

TEST(Locate, SharedFacesGoToLowestIndex) {
  auto m = build_mesh(2, 2, 1, 1.0, 1.0, 1.0, Rect{0, 1, 0, 1});
  // Interior vertex (0.5,0.5) is shared by 6 triangles; the lowest is 0.
  EXPECT_EQ(locate(m, Vec2(0.5, 0.5), 0.5).triangle, 0);
  // Vertical line x=0.5 between squares 0 and 1: square 0 (triangle 0) wins.
  EXPECT_EQ(locate(m, Vec2(0.5, 0.25), 0.5).triangle, 0);
  // Horizontal line y=0.5 between squares 0 and 2: triangle 1 of square 0.
  EXPECT_EQ(locate(m, Vec2(0.25, 0.5), 0.5).triangle, 1);
  // Diagonal of square 0 belongs to both of its triangles.
  EXPECT_EQ(locate(m, Vec2(0.2, 0.2), 0.5).triangle, 0);
}

TEST(Locate, BarycentricReproducesPoint) {
  auto m = build_mesh(3, 5, 2, 1.5, 2.5, 1.0, Rect{0, 0.5, 0, 0.5});
  for (double x : {0.0, 0.11, 0.5, 0.77, 1.5})
    for (double y : {0.0, 0.3, 1.0, 2.41, 2.5}) {
      Location loc = locate(m, Vec2(x, y), 0.3);
      const auto& tri = m.triangles[loc.triangle];
      Vec2 p = Vec2::Zero();
      for (int k = 0; k < 3; ++k) {
        p += loc.bary[k] * m.vertices[tri[k]];
        EXPECT_GE(loc.bary[k], -1e-12);
      }
      EXPECT_NEAR(p.x(), x, 1e-12);
      EXPECT_NEAR(p.y(), y, 1e-12);
    }
}

TEST(Locate, RejectsOutside) {
  auto m = build_mesh(2, 2, 2, 1.0, 1.0, 1.0, Rect{0, 1, 0, 1});
  EXPECT_THROW(locate(m, Vec2(1.1, 0.5), 0.5), std::out_of_range);
  EXPECT_THROW(locate(m, Vec2(0.5, 0.5), 1.5), std::out_of_range);
}
