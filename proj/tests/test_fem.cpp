#include <gtest/gtest.h>

#include <random>

#include "nullctl/fem.hpp"
#include "nullctl/weights.hpp"

using namespace nullctl;

namespace {

std::shared_ptr<const SpaceTimeMesh> unit_mesh(int nx, int ny, int nt, double T = 1.0) {
  return std::make_shared<const SpaceTimeMesh>(build_mesh(nx, ny, nt, 1.0, 1.0, T, Rect{0, 1, 0, 1}));
}

double ipow(double x, int k) {
  double r = 1;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

}  // namespace

TEST(Quadrature, IntervalExactness) {
  for (int deg = 0; deg <= 12; ++deg) {
    Rule1D r = interval_rule(deg);
    for (int k = 0; k <= deg; ++k) {
      double s = 0;
      for (size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * ipow(r.x[i], k);
      EXPECT_NEAR(s, 1.0 / (k + 1), 1e-14) << deg << " " << k;
    }
    for (size_t i = 0; i < r.x.size(); ++i) {
      EXPECT_GT(r.x[i], 0.0);
      EXPECT_LT(r.x[i], 1.0);
      EXPECT_GT(r.w[i], 0.0);
    }
  }
}

TEST(Quadrature, TriangleExactness) {
  // int_T xi^p eta^q = p! q! / (p+q+2)!
  auto fact = [](int n) {
    double r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
  };
  for (int deg = 0; deg <= 12; ++deg) {
    RuleTri r = triangle_rule(deg);
    for (int p = 0; p <= deg; ++p)
      for (int q = 0; p + q <= deg; ++q) {
        double s = 0;
        for (size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * ipow(r.x[i].x(), p) * ipow(r.x[i].y(), q);
        EXPECT_NEAR(s, fact(p) * fact(q) / fact(p + q + 2), 1e-15) << deg;
      }
    for (double w : r.w) EXPECT_GT(w, 0.0);
  }
}

TEST(Quadrature, FinalSlabRuleIsRaised) {
  QuadratureRule q = make_quadrature(6, 6);
  EXPECT_GT(q.time_final.x.size(), q.time.x.size());
  EXPECT_LT(q.time_final.x.back(), 1.0);
}

TEST(BuildSpace, BilinearSingleCell) {
  auto V = build_space(unit_mesh(1, 1, 1), 1, 1, 1, Constraint::none);
  EXPECT_EQ(V->n_scalar(), 8);
}

TEST(BuildSpace, P2Counts) {
  auto mesh = unit_mesh(8, 8, 16);
  auto V = build_space(mesh, 2, 2, 1, Constraint::none);
  EXPECT_EQ(V->n_scalar(), 9537);
  EXPECT_EQ(V->n_free(), 9537);
  auto W = build_space(mesh, 2, 2, 1, Constraint::zero_lateral);
  EXPECT_EQ(W->n_dofs() - W->n_free(), 2112);
  auto F = build_space(mesh, 2, 2, 1, Constraint::zero_lateral_final);
  EXPECT_EQ(F->n_dofs() - F->n_free(), 2112 + 15 * 15);
  auto V2 = build_space(mesh, 2, 2, 2, Constraint::zero_lateral);
  EXPECT_EQ(V2->n_dofs(), 2 * 9537);
  EXPECT_EQ(V2->n_dofs() - V2->n_free(), 2 * 2112);
}

TEST(BuildSpace, SharedNodesCoincide) {
  auto mesh = unit_mesh(3, 2, 2);
  auto V = build_space(mesh, 3, 2, 1, Constraint::none);
  const auto& M = *mesh;
  std::vector<int> nodes(V->n_local_spatial());
  for (int t = 0; t < M.num_triangles(); ++t) {
    V->spatial_nodes(t, nodes.data());
    TriangleMap f = triangle_map(M, t);
    const auto& lat = V->tri_basis().lattice();
    for (int k = 0; k < V->n_local_spatial(); ++k) {
      Vec2 ref(lat[k][0] / 3.0, lat[k][1] / 3.0);
      Vec2 x = f(ref);
      EXPECT_NEAR((x - V->spatial_coord(nodes[k])).norm(), 0.0, 1e-14);
    }
  }
}

TEST(EvalBasis, PartitionOfUnity) {
  for (int m = 1; m <= 4; ++m) {
    RefTriangle b(m);
    RefInterval r(m);
    std::vector<double> v(b.size()), tv(r.size()), td(r.size());
    std::vector<Vec2> g(b.size());
    for (Vec2 p : {Vec2(0.1, 0.2), Vec2(0.7, 0.05), Vec2(0, 1), Vec2(1. / 3, 1. / 3)}) {
      b.eval(p, v.data(), g.data());
      double s = 0;
      Vec2 gs = Vec2::Zero();
      for (int k = 0; k < b.size(); ++k) s += v[k], gs += g[k];
      EXPECT_NEAR(s, 1.0, 1e-12);
      EXPECT_NEAR(gs.norm(), 0.0, 1e-10);
    }
    r.eval(0.37, tv.data(), td.data());
    double s = 0, d = 0;
    for (int a = 0; a < r.size(); ++a) s += tv[a], d += td[a];
    EXPECT_NEAR(s, 1.0, 1e-13);
    EXPECT_NEAR(d, 0.0, 1e-11);
  }
}

TEST(EvalBasis, LagrangeProperty) {
  RefTriangle b(3);
  std::vector<double> v(b.size());
  for (int i = 0; i < b.size(); ++i) {
    b.eval(Vec2(b.lattice()[i][0] / 3.0, b.lattice()[i][1] / 3.0), v.data(), nullptr);
    for (int k = 0; k < b.size(); ++k) EXPECT_NEAR(v[k], i == k ? 1.0 : 0.0, 1e-12);
  }
}

TEST(EvalBasis, PolynomialReproduction) {
  std::mt19937 gen(3);
  for (int m = 1; m <= 4; ++m) {
    auto mesh = std::make_shared<const SpaceTimeMesh>(build_mesh(3, 4, 3, 1.5, 1.0, 2.0, Rect{0, 0.5, 0, 0.5}));
    auto V = build_space(mesh, m, m, 1, Constraint::none);
    auto g = [m](const Vec2& x, double t) { return ipow(x.x(), m) * ipow(t, m) + ipow(x.y(), m) - x.x() * t; };
    VectorXd u = interpolate_scalar(*V, g);
    std::uniform_real_distribution<double> ux(0, 1.5), uy(0, 1.0), ut(0, 2.0);
    for (int k = 0; k < 50; ++k) {
      Vec2 x(ux(gen), uy(gen));
      double t = ut(gen);
      FieldValue fv = evaluate(*V, u, x, t);
      EXPECT_NEAR(fv.value[0], g(x, t), 1e-12 * std::max(1.0, std::abs(g(x, t)))) << m;
      double gx = m * ipow(x.x(), m - 1) * ipow(t, m) - t;
      double gy = m * ipow(x.y(), m - 1);
      double gt = m * ipow(x.x(), m) * ipow(t, m - 1) - x.x();
      EXPECT_NEAR(fv.grad[0].x(), gx, 1e-10 * std::max(1.0, std::abs(gx)));
      EXPECT_NEAR(fv.grad[0].y(), gy, 1e-10 * std::max(1.0, std::abs(gy)));
      EXPECT_NEAR(fv.dt[0], gt, 1e-10 * std::max(1.0, std::abs(gt)));
    }
  }
}

TEST(EvalBasis, InterpolationRoundTripAtNodes) {
  auto mesh = unit_mesh(3, 3, 2);
  auto V = build_space(mesh, 2, 2, 2, Constraint::none);
  auto f = [](const Vec2& x, double t, double* v) {
    v[0] = std::sin(3 * x.x()) * std::exp(t);
    v[1] = std::cos(x.y() + t);
  };
  VectorXd u = interpolate(*V, f);
  for (int k = 0; k < V->n_temporal(); ++k)
    for (int s = 0; s < V->n_spatial(); ++s) {
      FieldValue fv = evaluate(*V, u, V->spatial_coord(s), V->temporal_coord(k));
      EXPECT_NEAR(fv.value[0], u[V->dof(0, k, s)], 1e-13);
      EXPECT_NEAR(fv.value[1], u[V->dof(1, k, s)], 1e-13);
    }
}

TEST(Constraint, IdempotentAndMasks) {
  auto mesh = unit_mesh(4, 3, 3);
  std::mt19937 gen(1);
  std::normal_distribution<double> nd;
  for (Constraint c : {Constraint::none, Constraint::zero_lateral, Constraint::zero_lateral_final,
                       Constraint::zero_mean_slice}) {
    auto V = build_space(mesh, 2, 1, 2, c);
    VectorXd u(V->n_dofs());
    for (int i = 0; i < u.size(); ++i) u[i] = nd(gen);
    V->apply_constraint(u);
    VectorXd w = u;
    V->apply_constraint(w);
    EXPECT_LE((w - u).norm(), 1e-14 * u.norm());
    for (int d = 0; d < V->n_dofs(); ++d) {
      bool bnd = V->spatial_on_boundary(V->snode_of(d));
      bool fin = V->tnode_of(d) == V->n_temporal() - 1;
      bool expect_fixed = (c == Constraint::zero_lateral && bnd) ||
                          (c == Constraint::zero_lateral_final && (bnd || fin));
      EXPECT_EQ(V->is_fixed(d), expect_fixed);
    }
    if (c == Constraint::zero_mean_slice)
      for (int comp = 0; comp < 2; ++comp)
        for (int k = 0; k < V->n_temporal(); ++k) {
          double m = 0;
          for (int s = 0; s < V->n_spatial(); ++s) m += V->slice_weights()[s] * u[V->dof(comp, k, s)];
          EXPECT_NEAR(m, 0.0, 1e-14);
        }
  }
}

TEST(Constraint, SliceWeightsIntegrateDomain) {
  auto V = build_space(unit_mesh(3, 5, 1), 2, 1, 1, Constraint::zero_mean_slice);
  double s = 0;
  for (double w : V->slice_weights()) s += w;
  EXPECT_NEAR(s, 1.0, 1e-14);
}

TEST(L2Norm, ConstantAndLinear) {
  auto mesh = unit_mesh(3, 3, 2);
  auto V = build_space(mesh, 2, 2, 1, Constraint::none);
  VectorXd one = interpolate_scalar(*V, [](const Vec2&, double) { return 1.0; });
  EXPECT_NEAR(l2_norm(*V, one), 1.0, 1e-14);
  auto V1 = build_space(mesh, 1, 1, 1, Constraint::none);
  VectorXd x1 = interpolate_scalar(*V1, [](const Vec2& x, double) { return x.x(); });
  EXPECT_NEAR(l2_norm(*V1, x1), std::sqrt(1.0 / 3), 1e-14);
  EXPECT_NEAR(l2_norm(*V1, x1), 0.5773503, 1e-7);
}

TEST(L2Norm, MassMatrixMatchesQuadrature) {
  auto mesh = unit_mesh(3, 2, 3);
  auto V = build_space(mesh, 2, 2, 2, Constraint::none);
  VectorXd u = interpolate(*V, [](const Vec2& x, double t, double* v) {
    v[0] = std::sin(x.x() + 2 * t);
    v[1] = x.y() * t;
  });
  SpMat Mm = mass_matrix(*V);
  EXPECT_NEAR(std::sqrt(u.dot(Mm * u)), l2_norm(*V, u), 1e-13);
}

TEST(L2Norm, WeightedMatchesRefinedQuadrature) {
  auto mesh = unit_mesh(4, 4, 4);
  WeightSet ws(1, 1, 1, Vec2(0.5, 0.5), 1, 2, Rect{0.25, 0.75, 0.25, 0.75});
  auto V = build_space(mesh, 2, 2, 1, Constraint::none);
  VectorXd u = interpolate_scalar(*V, [](const Vec2& x, double t) { return 1 + x.x() * x.y() - t; });
  auto w = [&](const Vec2& x, double t) {
    double r = ws.inv_weight(Weight::base, x, t);
    return r * r;
  };
  double coarse = l2_norm(*V, u, w);
  // Composite midpoint-free reference: Gauss rules of much higher degree.
  QuadratureRule fine = make_quadrature(24, 40);
  double ref = l2_norm(*V, u, w, &fine);
  EXPECT_NEAR(coarse, ref, 1e-6 * ref);
}
