#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "nullctl/forward.hpp"

using namespace nullctl;
using std::numbers::pi;

TEST(Trajectory, PoiseuilleMidline) {
  Trajectory tr{TrajectoryKind::poiseuille};
  Vec2 v = trajectory_eval(tr, Vec2(0.3, 0.5), 0.7);
  EXPECT_DOUBLE_EQ(v.x(), 1.0);
  EXPECT_DOUBLE_EQ(v.y(), 0.0);
}

TEST(Trajectory, TaylorGreenAtOrigin) {
  Trajectory tr{TrajectoryKind::taylor_green};
  Vec2 v = trajectory_eval(tr, Vec2(pi / 4, 0.0), 0.0);
  EXPECT_NEAR(v.x(), 1.0, 1e-15);
  EXPECT_NEAR(v.y(), 0.0, 1e-15);
}

TEST(Trajectory, TaylorGreenDivergenceFree) {
  Trajectory tr{TrajectoryKind::taylor_green};
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> ux(0.1, pi - 0.1), ut(0.0, 1.0);
  double h = 1e-5;
  for (int k = 0; k < 100; ++k) {
    Vec2 x(ux(gen), ux(gen));
    double t = ut(gen);
    double div = (tr(x + Vec2(h, 0), t).x() - tr(x - Vec2(h, 0), t).x()) / (2 * h) +
                 (tr(x + Vec2(0, h), t).y() - tr(x - Vec2(0, h), t).y()) / (2 * h);
    EXPECT_LE(std::abs(div), 1e-6);
  }
}

TEST(Trajectory, KindNames) {
  EXPECT_EQ(trajectory_kind("taylor_green"), TrajectoryKind::taylor_green);
  EXPECT_THROW(trajectory_kind("couette"), std::invalid_argument);
}

TEST(CurlPerturbation, VanishesOnBoundary) {
  for (double s : {0.0, 0.25, 0.5, 1.0}) {
    EXPECT_EQ(curl_perturbation(PsiKind::unit_box, 0.1, Vec2(s, 0.0)), Vec2::Zero());
    EXPECT_EQ(curl_perturbation(PsiKind::unit_box, 0.1, Vec2(0.0, s)), Vec2::Zero());
    EXPECT_EQ(curl_perturbation(PsiKind::unit_box, 0.1, Vec2(1.0, s)), Vec2::Zero());
    EXPECT_EQ(curl_perturbation(PsiKind::pi_box, 0.1, Vec2(pi * s, pi)), Vec2::Zero());
  }
}

TEST(CurlPerturbation, DivergenceFree) {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  double h = 1e-6;
  for (PsiKind k : {PsiKind::unit_box, PsiKind::pi_box}) {
    double l = k == PsiKind::unit_box ? 1.0 : pi;
    for (int i = 0; i < 50; ++i) {
      Vec2 x(l * u(gen), l * u(gen));
      auto f = [&](const Vec2& p) { return curl_perturbation(k, 0.1, p); };
      double div = (f(x + Vec2(h, 0)).x() - f(x - Vec2(h, 0)).x()) / (2 * h) +
                   (f(x + Vec2(0, h)).y() - f(x - Vec2(0, h)).y()) / (2 * h);
      EXPECT_LE(std::abs(div), 1e-8);
    }
  }
}

TEST(CurlPerturbation, ZeroAmplitude) {
  EXPECT_EQ(curl_perturbation(PsiKind::pi_box, 0.0, Vec2(1.0, 1.2)), Vec2::Zero());
}

TEST(CurlPerturbation, MatchesStreamFunctionDerivatives) {
  // psi = (x1 x2)^2 ((1-x1)(1-x2))^2 differentiated by central differences.
  auto psi = [](double a, double b) { return std::pow(a * b * (1 - a) * (1 - b), 2); };
  Vec2 x(0.3, 0.65);
  double h = 1e-6;
  Vec2 fd((psi(x.x(), x.y() + h) - psi(x.x(), x.y() - h)) / (2 * h),
          -(psi(x.x() + h, x.y()) - psi(x.x() - h, x.y())) / (2 * h));
  Vec2 v = curl_perturbation(PsiKind::unit_box, 1.0, x);
  EXPECT_NEAR(v.x(), fd.x(), 1e-9);
  EXPECT_NEAR(v.y(), fd.y(), 1e-9);
}

TEST(HeatForward, SineModeDecay) {
  HeatForwardOptions o;
  o.nx = o.ny = 32;
  o.nt = 200;
  auto y0 = [](const Vec2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  auto r = heat_forward_cn(1, 1, 0.1, y0, nullptr, nullptr, o);
  double expect = std::exp(-2 * pi * pi * 0.1) * r.y0_norm;
  EXPECT_NEAR(r.history.state.back() / expect, 1.0, 0.01);
  EXPECT_NEAR(r.y0_norm, 0.5, 1e-10);
}

TEST(HeatForward, ZeroDatumStaysZero) {
  HeatForwardOptions o;
  o.nx = o.ny = 8;
  o.nt = 10;
  auto r = heat_forward_cn(1, 1, 1, [](const Vec2&) { return 0.0; }, [](const Vec2&, double) { return 1.0; },
                           [](const Vec2&, double) { return 0.0; }, o);
  EXPECT_EQ(r.y_final.cwiseAbs().maxCoeff(), 0.0);
  for (double s : r.history.state) EXPECT_EQ(s, 0.0);
}

TEST(HeatForward, IncompatibleDataSatisfiesBoundaryConditions) {
  HeatForwardOptions o;
  o.nx = o.ny = 10;
  o.nt = 200;
  auto r = heat_forward_cn(1, 1, 1, [](const Vec2&) { return 1000.0; }, [](const Vec2&, double) { return 1.0; },
                           nullptr, o);
  const auto& V = *r.space;
  double interior = 0;
  for (int s = 0; s < V.n_spatial(); ++s) {
    if (V.spatial_on_boundary(s))
      EXPECT_EQ(r.y_final[s], 0.0);
    else
      interior = std::max(interior, r.y_final[s]);
  }
  EXPECT_GT(interior, 0.0);
  // The first sine mode of y0 has norm 1000 * 8 / pi^2 and decays as exp(-(2 pi^2 + 1) t).
  double first = 1000.0 * 8 / (pi * pi) * std::exp(-(2 * pi * pi + 1));
  EXPECT_NEAR(r.history.state.back() / first, 1.0, 0.05);
}

TEST(HeatForward, SecondOrderInTime) {
  auto y0 = [](const Vec2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  auto err = [&](int nt) {
    HeatForwardOptions o;
    o.nx = o.ny = 16;
    o.nt = nt;
    o.rannacher_steps = 0;
    auto r = heat_forward_cn(1, 1, 0.5, y0, nullptr, nullptr, o);
    return std::abs(r.history.state.back() - std::exp(-2 * pi * pi * 0.5) * r.y0_norm);
  };
  double ratio = err(10) / err(20);
  EXPECT_GE(ratio, 3.0);
  EXPECT_LE(ratio, 5.0);
}

TEST(HeatForward, ControlSourceIsApplied) {
  // y_t - Lap y = v with v chosen so that y = t sin(pi x1) sin(pi x2).
  HeatForwardOptions o;
  o.nx = o.ny = 16;
  o.nt = 40;
  auto s = [](const Vec2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  auto r = heat_forward_cn(1, 1, 0.5, [](const Vec2&) { return 0.0; }, nullptr,
                           [&](const Vec2& x, double t) { return (1 + 2 * pi * pi * t) * s(x); }, o);
  EXPECT_NEAR(r.history.state.back(), 0.5 * 0.5, 1e-4);
  EXPECT_GT(r.history.control.back(), 0.0);
}

TEST(HeatForward, HistoryInvariants) {
  HeatForwardOptions o;
  o.nx = o.ny = 6;
  o.nt = 12;
  auto r = heat_forward_cn(1, 1, 1, [](const Vec2&) { return 5.0; }, nullptr, nullptr, o);
  ASSERT_EQ(r.history.t.size(), 13u);
  for (size_t k = 1; k < r.history.t.size(); ++k) EXPECT_GT(r.history.t[k], r.history.t[k - 1]);
  for (double s : r.history.state) EXPECT_GE(s, 0.0);
  EXPECT_DOUBLE_EQ(r.history.t.back(), 1.0);
  std::ostringstream os;
  write_heat_norms_csv(os, r.history);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,control_norm,state_norm");
}

TEST(FlowForward, TaylorGreenDecay) {
  FlowForwardOptions o;
  o.nx = o.ny = 32;
  o.nt = 50;
  Trajectory tg{TrajectoryKind::taylor_green};
  auto r = flow_forward(pi, pi, 0.5, 1.0, [&](const Vec2& x) { return tg(x, 0.0); }, nullptr, tg, o);
  double rel = r.history.state.back() / (std::exp(-4.0) * r.history.state.front());
  EXPECT_NEAR(rel, 1.0, 0.02);
  EXPECT_FALSE(r.history.divergence_warning);
}

TEST(FlowForward, PoiseuilleIsSteady) {
  FlowForwardOptions o;
  o.nx = 20;
  o.ny = 4;
  o.nt = 10;
  Trajectory p{TrajectoryKind::poiseuille};
  auto r = flow_forward(5, 1, 2, 1.0, [&](const Vec2& x) { return p(x, 0.0); }, nullptr, p, o);
  for (double d : r.history.deviation) EXPECT_LE(d, 1e-10);
}

TEST(FlowForward, ZeroStaysZero) {
  FlowForwardOptions o;
  o.nx = o.ny = 6;
  o.nt = 5;
  auto r = flow_forward(1, 1, 1, 1.0, [](const Vec2&) { return Vec2::Zero(); }, nullptr, Trajectory{}, o);
  EXPECT_EQ(r.y_final.cwiseAbs().maxCoeff(), 0.0);
  std::ostringstream os;
  write_flow_norms_csv(os, r.history);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,deviation_norm");
}

TEST(FlowForward, StokesDecayOfDivergenceFreeMode) {
  // Linear Stokes with y0 = curl of a box bubble and zero boundary data decays monotonically.
  FlowForwardOptions o;
  o.nx = o.ny = 8;
  o.nt = 20;
  o.nonlinear = false;
  auto r = flow_forward(1, 1, 0.2, 1.0, [](const Vec2& x) { return curl_perturbation(PsiKind::unit_box, 10.0, x); },
                        nullptr, Trajectory{}, o);
  for (size_t k = 1; k < r.history.state.size(); ++k) EXPECT_LT(r.history.state[k], r.history.state[k - 1]);
  EXPECT_FALSE(r.history.divergence_warning);
}
