#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nullctl/pipeline.hpp"

using namespace nullctl;
using std::numbers::pi;

namespace {

RunConfig small_heat() {
  RunConfig c = *preset("heat-sec26");
  c.nx = c.ny = 5;
  c.nt = 4;
  c.method = "direct";
  c.fwd_nx = c.fwd_ny = 10;
  c.fwd_nt = 20;
  return c;
}

RunConfig small_stokes() {
  RunConfig c = *preset("stokes-sec37");
  c.nx = c.ny = 5;
  c.nt = 3;
  c.method = "direct";
  c.fwd_nx = c.fwd_ny = 6;
  c.fwd_nt = 5;
  return c;
}

RunConfig small_tg() {
  RunConfig c = *preset("ns-taylor-green");
  c.nx = c.ny = 3;
  c.nt = 3;
  c.method = "direct";
  c.fwd_nx = c.fwd_ny = 6;
  c.fwd_nt = 5;
  return c;
}

double rel_diff(const VectorXd& a, const VectorXd& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST(HeatControl, ZeroDatumGivesZeroSolution) {
  RunConfig c = small_heat();
  c.y0_scale = 0;
  for (std::string method : {"direct", "ah"}) {
    c.method = method;
    auto cs = solve_heat_control(c);
    EXPECT_EQ(cs.J, 0.0);
    EXPECT_EQ(cs.z.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(cs.p.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(cs.control(Vec2(0.4, 0.4), 0.3).x(), 0.0);
    EXPECT_EQ(cs.state(Vec2(0.3, 0.7), 0.5).x(), 0.0);
    EXPECT_EQ(cs.verification.state.back(), 0.0);
  }
}

TEST(HeatControl, ControlVanishesOutsideOmega) {
  auto cs = solve_heat_control(small_heat());
  const auto& M = *cs.mesh;
  int inside_nonzero = 0;
  for (int tri = 0; tri < M.num_triangles(); ++tri)
    for (double t : {0.05, 0.3, 0.61, 0.9}) {
      double v = cs.control(M.centroid(tri), t).x();
      if (M.omega_flag[tri])
        inside_nonzero += v != 0.0;
      else
        EXPECT_EQ(v, 0.0);
    }
  EXPECT_GT(inside_nonzero, 0);
}

TEST(HeatControl, PresetProducesFiniteCostAndVerifiedDecay) {
  auto cs = solve_heat_control(small_heat());
  EXPECT_TRUE(std::isfinite(cs.J));
  EXPECT_GT(cs.J, 0.0);
  ASSERT_FALSE(cs.verification.state.empty());
  EXPECT_TRUE(std::isfinite(cs.verification.state.back()));
  // Four time slabs are too coarse to beat the free decay; only boundedness is checked here.
  EXPECT_LT(cs.verification.state.back(), 1e-3 * cs.y0_norm);
  EXPECT_GT(*std::max_element(cs.verification.control.begin(), cs.verification.control.end()), 0.0);
  EXPECT_EQ(cs.verification.t.size(), 21u);
}

TEST(HeatControl, CostMatchesOriginalVariables) {
  // Small K1 keeps rho finite at every quadrature point.
  RunConfig c = small_heat();
  c.K1 = 0.05;
  auto cs = solve_heat_control(c);
  const WeightSet& ws = *cs.weights;
  Rect om = ws.omega();
  double sum = detail::integrate(*cs.zspace, [&](const Vec2& x, double t, const Location&) {
    double ri = ws.inv_weight(Weight::base, x, t), r0i = ws.inv_weight(Weight::rho0, x, t);
    EXPECT_GT(ri, 0.0);
    double y = cs.state(x, t).x(), v = cs.control(x, t).x();
    double val = y * y / (ri * ri);
    if (om.strictly_contains(x)) val += v * v / (r0i * r0i);
    return val;
  });
  EXPECT_NEAR(0.5 * sum / cs.J, 1.0, 1e-6);
}

TEST(HeatControl, LinearInInitialDatum) {
  RunConfig c = small_heat();
  auto a = solve_heat_control(c);
  c.y0_scale = 2;
  auto b = solve_heat_control(c);
  EXPECT_LE(rel_diff(b.z, 2 * a.z), 1e-8);
  EXPECT_LE(rel_diff(b.p, 2 * a.p), 1e-8);
  Vec2 x(0.45, 0.35);
  EXPECT_NEAR(b.control(x, 0.2).x(), 2 * a.control(x, 0.2).x(), 1e-8 * std::abs(a.control(x, 0.2).x()));
}

TEST(HeatControl, BitwiseIdenticalAcrossWorkerCounts) {
  RunConfig c = small_heat();
  c.jobs = 1;
  auto a = solve_heat_control(c);
  c.jobs = 3;
  auto b = solve_heat_control(c);
  EXPECT_TRUE(a.z == b.z);
  EXPECT_TRUE(a.p == b.p);
  EXPECT_EQ(a.J, b.J);
  EXPECT_TRUE(a.verification.state == b.verification.state);
  EXPECT_TRUE(a.verification.control == b.verification.control);
}

TEST(HeatControl, ArrowHurwiczLogIsKept) {
  RunConfig c = small_heat();
  c.method = "ah";
  c.max_iter = 20;
  auto cs = solve_heat_control(c);
  EXPECT_EQ(cs.log.records.size(), 20u);
  EXPECT_EQ(cs.solver_used, "ah+direct");
  c.fallback = false;
  auto raw = solve_heat_control(c);
  EXPECT_EQ(raw.solver_used, "ah");
  EXPECT_FALSE(raw.ah_converged);
}

TEST(StokesControl, ZeroDatumGivesZeroSolution) {
  RunConfig c = small_stokes();
  c.y0_scale = 0;
  auto cs = solve_stokes_control(c);
  EXPECT_EQ(cs.J, 0.0);
  EXPECT_EQ(cs.x.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(cs.control(Vec2(0.4, 0.4), 0.5), Vec2::Zero());
}

TEST(StokesControl, LinearInInitialDatumAndLocal) {
  RunConfig c = small_stokes();
  c.y0 = {1000.0, 300.0};
  auto a = solve_stokes_control(c);
  c.y0_scale = 2;
  auto b = solve_stokes_control(c);
  EXPECT_LE(rel_diff(b.z, 2 * a.z), 1e-8);
  EXPECT_LE(rel_diff(b.p, 2 * a.p), 1e-8);
  const auto& M = *a.mesh;
  for (int tri = 0; tri < M.num_triangles(); ++tri)
    if (!M.omega_flag[tri]) EXPECT_EQ(a.control(M.centroid(tri), 0.4), Vec2::Zero());
  EXPECT_TRUE(std::isfinite(a.J));
  EXPECT_GE(a.J, 0.0);
}

TEST(FixedPoint, ZeroPerturbationStopsAfterOneIteration) {
  RunConfig c = small_tg();
  c.M = 0;
  auto r = fixed_point_ns(c, false);
  ASSERT_EQ(r.log.records.size(), 1u);
  EXPECT_TRUE(r.log.converged);
  EXPECT_EQ(r.solution.z.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.solution.control(Vec2(1.5, 1.5), 0.5), Vec2::Zero());
}

TEST(FixedPoint, ConsistentAtConvergence) {
  RunConfig c = small_tg();
  c.outer_tol = 1e-6;
  auto r = fixed_point_ns(c, false);
  ASSERT_TRUE(r.log.converged);
  ASSERT_GE(r.log.records.size(), 2u);
  EXPECT_LT(r.log.records.back().rel_err, r.log.records.front().rel_err);
  auto pr = detail::prepare(c);
  FlowSpaces sp = make_flow_spaces(pr.mesh, c.m, c.n);
  SaddleSystem S = assemble_fixed_point_step(sp, *pr.weights, c, make_trajectory(c), r.solution.z);
  auto sol = direct_solve(S);
  VectorXd z = S.field(sol.x, "z");
  EXPECT_LE(fixed_point_change(*sp.z, *pr.weights, z, r.solution.z), 10 * c.outer_tol);
}

TEST(FixedPoint, InitialDatumIsPerturbedTrajectory) {
  RunConfig c = *preset("ns-taylor-green");
  auto y0 = ns_initial_datum(c);
  for (Vec2 x : {Vec2(1.0, 0.5), Vec2(2.0, 2.5), Vec2(0.3, 3.0)}) {
    Vec2 want(std::sin(2 * x.x()) * std::cos(2 * x.y()), -std::cos(2 * x.x()) * std::sin(2 * x.y()));
    auto f = [](double s) { return s * s * (pi - s) * (pi - s); };
    auto df = [](double s) { return 2 * s * (pi - s) * (pi - 2 * s); };
    want += 0.1 * Vec2(f(x.x()) * df(x.y()), -df(x.x()) * f(x.y()));
    EXPECT_NEAR((y0(x) - want).norm(), 0.0, 1e-12 * want.norm());
  }
}

TEST(FixedPoint, LogCsv) {
  FixedPointLog log;
  log.records = {{1, 0.5}, {2, 0.25}};
  std::ostringstream os;
  write_fixed_point_csv(os, log);
  EXPECT_EQ(os.str(), "n,rel_err\n1,5.000000e-01\n2,2.500000e-01\n");
}
