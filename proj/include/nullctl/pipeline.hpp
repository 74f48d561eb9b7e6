#pragma once

// End-to-end control computation: assemble, solve, extract control and state, verify forward.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "nullctl/config.hpp"
#include "nullctl/forms.hpp"
#include "nullctl/forward.hpp"
#include "nullctl/saddle_solver.hpp"

namespace nullctl {

struct ControlSolution {
  std::string scenario;
  std::shared_ptr<const SpaceTimeMesh> mesh;
  std::shared_ptr<const WeightSet> weights;
  SaddleSystem system;
  VectorXd x, lambda;  // raw coefficient blocks
  IterationLog log;
  std::string solver_used;  // ah | direct | ah+direct
  bool ah_converged = false;
  int power = 1;  // exponent of the inverse weights in the extraction (1 heat, 2 flows)
  SpacePtr zspace, pspace;
  VectorXd z, p;  // full-length coefficients of the state and adjoint fields
  double J = 0;
  NormHistory verification, uncontrolled;
  double y0_norm = 0;

  // Flow diagnostics of the extracted state.
  double divergence_residual = 0;  // |div y| / |grad y| in L2(Q_T)
  double y2_ratio = 0;             // max|y_2| / max|y_1| over space-time nodes
  double constraint_ratio = 0;     // |Bx| / |L|

  int components() const { return zspace ? zspace->components() : 1; }

  double state_factor(const Vec2& x, double t) const {
    return std::pow(weights->inv_weight(Weight::base, x, t), power);
  }
  double control_factor(const Vec2& x, double t) const {
    return std::pow(weights->inv_weight(Weight::rho0, x, t), power);
  }

  // y = rho^{-power} z.
  Vec2 state(const Vec2& x, double t) const {
    if (z.size() == 0) return Vec2::Zero();
    Location loc = locate(*mesh, x, t);
    FieldValue f = evaluate_at(*zspace, z, loc);
    double r = state_factor(x, t);
    return Vec2(r * f.value[0], r * f.value[1]);
  }

  // v = -rho_0^{-power} p on omega-flagged cells, exactly 0 elsewhere.
  Vec2 control(const Vec2& x, double t) const {
    if (p.size() == 0) return Vec2::Zero();
    Location loc = locate(*mesh, x, t);
    if (!mesh->omega_flag[loc.triangle]) return Vec2::Zero();
    FieldValue f = evaluate_at(*pspace, p, loc);
    double r = -control_factor(x, t);
    return Vec2(r * f.value[0], r * f.value[1]);
  }
};

struct FixedPointRecord {
  int n;
  double rel_err;
};

struct FixedPointLog {
  std::vector<FixedPointRecord> records;
  bool converged = false;
  bool stagnated = false;
};

inline void write_fixed_point_csv(std::ostream& os, const FixedPointLog& log) {
  os << "n,rel_err\n";
  char buf[64];
  for (const auto& r : log.records) {
    std::snprintf(buf, sizeof buf, "%d,%.6e\n", r.n, r.rel_err);
    os << buf;
  }
}

namespace detail {

// Sums f(x, t, loc) * w over the default space-time quadrature of V.
inline double integrate(const TensorFemSpace& V, const std::function<double(const Vec2&, double, const Location&)>& f) {
  QuadratureRule q = default_quadrature(V);
  const auto& M = V.mesh();
  double sum = 0;
  for (int pr = 0; pr < M.num_prisms(); ++pr) {
    const Prism& P = M.prisms[pr];
    bool fin = P.slab == M.nt - 1;
    const Rule1D& rt = q.time_rule(fin);
    TriangleMap fm = triangle_map(M, P.triangle);
    for (size_t iq = 0; iq < q.tri.x.size(); ++iq) {
      const Vec2& ref = q.tri.x[iq];
      Vec2 x = fm(ref);
      for (size_t jq = 0; jq < rt.x.size(); ++jq) {
        Location loc;
        loc.prism = pr;
        loc.triangle = P.triangle;
        loc.slab = P.slab;
        loc.bary = {1 - ref.x() - ref.y(), ref.x(), ref.y()};
        loc.tau = rt.x[jq];
        double t = M.time_nodes[P.slab] + rt.x[jq] * M.dt;
        sum += fm.det * q.tri.w[iq] * M.dt * rt.w[jq] * f(x, t, loc);
      }
    }
  }
  return sum;
}

struct PreparedRun {
  RunConfig cfg;
  std::shared_ptr<const SpaceTimeMesh> mesh;
  std::shared_ptr<const WeightSet> weights;
};

inline PreparedRun prepare(const RunConfig& in) {
  PreparedRun r{in, nullptr, nullptr};
  snap_omega_to_grid(r.cfg);
  validate(r.cfg);
  const RunConfig& c = r.cfg;
  r.mesh = std::make_shared<const SpaceTimeMesh>(build_mesh(c.nx, c.ny, c.nt, c.L1, c.L2, c.T, c.omega));
  r.weights = std::make_shared<const WeightSet>(c.L1, c.L2, c.T, c.anchor_point(), c.K1, c.K2, c.omega);
  return r;
}

inline void solve_into(ControlSolution& cs, const RunConfig& c) {
  const SaddleSystem& S = cs.system;
  SaddleSolution sol;
  if (c.method == "direct") {
    sol = direct_solve(S);
    cs.solver_used = "direct";
  } else {
    AHParams P;
    P.r = c.r;
    P.s = c.s;
    P.tol = c.tol;
    P.max_iter = c.max_iter;
    P.precond = c.precond == "augmented" ? Preconditioner::augmented : Preconditioner::none;
    P.gamma = c.gamma;
    sol = arrow_hurwicz(S, P);
    cs.ah_converged = sol.log.converged;
    cs.solver_used = "ah";
    if (!sol.log.converged && c.fallback) {
      SaddleSolution d = direct_solve(S);
      d.log.records = std::move(sol.log.records);
      sol = std::move(d);
      cs.solver_used = "ah+direct";
    }
  }
  cs.x = std::move(sol.x);
  cs.lambda = std::move(sol.lambda);
  cs.log = std::move(sol.log);
  double ln = S.L.norm();
  cs.constraint_ratio = ln > 0 ? cs.log.constraint_residual / ln : cs.log.constraint_residual;
}

inline bool in_omega(const Rect& om, const Vec2& x) { return om.strictly_contains(x); }

inline std::function<Vec2(const Vec2&)> flow_datum(const RunConfig& c) {
  Vec2 y0(c.y0[0] * c.y0_scale, c.y0[1] * c.y0_scale);
  return [y0](const Vec2&) { return y0; };
}

// |div y| / |grad y| over Q_T for y = rho^{-2} z.
inline double flow_divergence_residual(const ControlSolution& cs) {
  const WeightSet& ws = *cs.weights;
  double T = ws.T();
  double num = integrate(*cs.zspace, [&](const Vec2& x, double t, const Location& loc) {
    FieldValue f = evaluate_at(*cs.zspace, cs.z, loc);
    ChiValues ch = ws.chi(x);
    double r2 = std::pow(ws.inv_weight(Weight::base, ch.chi, t), 2);
    if (r2 == 0.0) return 0.0;
    Vec2 gw = -2.0 * ch.grad / (T - t);
    double div = 0;
    for (int c = 0; c < 2; ++c) div += r2 * (f.grad[c][c] + f.value[c] * gw[c]);
    return div * div;
  });
  double den = integrate(*cs.zspace, [&](const Vec2& x, double t, const Location& loc) {
    FieldValue f = evaluate_at(*cs.zspace, cs.z, loc);
    ChiValues ch = ws.chi(x);
    double r2 = std::pow(ws.inv_weight(Weight::base, ch.chi, t), 2);
    if (r2 == 0.0) return 0.0;
    Vec2 gw = -2.0 * ch.grad / (T - t);
    double g2 = 0;
    for (int c = 0; c < 2; ++c) g2 += (r2 * (f.grad[c] + f.value[c] * gw)).squaredNorm();
    return g2;
  });
  return den > 0 ? std::sqrt(num / den) : 0.0;
}

inline double flow_y2_ratio(const ControlSolution& cs) {
  const TensorFemSpace& V = *cs.zspace;
  double m1 = 0, m2 = 0;
  for (int k = 0; k < V.n_temporal(); ++k)
    for (int s = 0; s < V.n_spatial(); ++s) {
      double r = cs.state_factor(V.spatial_coord(s), V.temporal_coord(k));
      m1 = std::max(m1, std::abs(r * cs.z[V.dof(0, k, s)]));
      m2 = std::max(m2, std::abs(r * cs.z[V.dof(1, k, s)]));
    }
  return m1 > 0 ? m2 / m1 : 0.0;
}

inline double flow_cost(const ControlSolution& cs) {
  const WeightSet& ws = *cs.weights;
  Rect om = ws.omega();
  double a = l2_norm(*cs.zspace, cs.z, [&](const Vec2& x, double t) {
    return std::pow(ws.inv_weight(Weight::base, x, t), 2);
  });
  double b = l2_norm(*cs.pspace, cs.p, [&](const Vec2& x, double t) {
    return in_omega(om, x) ? std::pow(ws.inv_weight(Weight::rho0, x, t), 2) : 0.0;
  });
  return 0.5 * (a * a + b * b);
}

inline FlowForwardOptions flow_forward_options(const RunConfig& c, bool nonlinear) {
  FlowForwardOptions o;
  o.nx = c.fwd_nx;
  o.ny = c.fwd_ny;
  o.nt = c.fwd_nt;
  o.nonlinear = nonlinear;
  o.control_support = c.omega;
  o.jobs = c.jobs;
  return o;
}

}  // namespace detail

// Heat: v = -rho_0^{-1} p_hat 1_omega, y = rho^{-1} z_hat.
inline ControlSolution solve_heat_control(const RunConfig& config) {
  auto pr = detail::prepare(config);
  const RunConfig& c = pr.cfg;
  if (c.scenario != "heat") throw std::invalid_argument("pipeline: heat control needs scenario = heat");
  ControlSolution cs;
  cs.scenario = "heat";
  cs.mesh = pr.mesh;
  cs.weights = pr.weights;
  cs.power = 1;
  HeatSpaces sp = make_heat_spaces(pr.mesh, c.m, c.n);
  double G = c.G, y0v = c.y0[0] * c.y0_scale;
  ScalarFn Gf = [G](const Vec2&, double) { return G; };
  auto y0 = [y0v](const Vec2&) { return y0v; };
  FormOptions fo;
  fo.jobs = c.jobs;
  cs.system = assemble_heat(sp, *pr.weights, Gf, y0, fo);
  detail::solve_into(cs, c);
  cs.zspace = sp.z;
  cs.pspace = sp.p;
  cs.z = cs.system.field(cs.x, "z_hat");
  cs.p = cs.system.field(cs.x, "p_hat");

  Rect om = c.omega;
  double a = l2_norm(*sp.z, cs.z);
  double b = l2_norm(*sp.p, cs.p, [&](const Vec2& x, double) { return detail::in_omega(om, x) ? 1.0 : 0.0; });
  cs.J = 0.5 * (a * a + b * b);

  HeatForwardOptions ho;
  ho.nx = c.fwd_nx;
  ho.ny = c.fwd_ny;
  ho.nt = c.fwd_nt;
  ho.m = 2;
  ho.control_support = om;
  ho.jobs = c.jobs;
  ScalarFn v = [&cs](const Vec2& x, double t) { return cs.control(x, t).x(); };
  auto fwd = heat_forward_cn(c.L1, c.L2, c.T, y0, Gf, v, ho);
  auto unc = heat_forward_cn(c.L1, c.L2, c.T, y0, Gf, nullptr, ho);
  cs.verification = std::move(fwd.history);
  cs.uncontrolled = std::move(unc.history);
  cs.y0_norm = fwd.y0_norm;
  return cs;
}

// Stokes: v = -rho_0^{-2} p 1_omega, y = rho^{-2} z; verified with the linear flow solver.
inline ControlSolution solve_stokes_control(const RunConfig& config) {
  auto pr = detail::prepare(config);
  const RunConfig& c = pr.cfg;
  if (c.scenario != "stokes") throw std::invalid_argument("pipeline: Stokes control needs scenario = stokes");
  ControlSolution cs;
  cs.scenario = "stokes";
  cs.mesh = pr.mesh;
  cs.weights = pr.weights;
  cs.power = 2;
  FlowSpaces sp = make_flow_spaces(pr.mesh, c.m, c.n);
  auto y0 = detail::flow_datum(c);
  FormOptions fo;
  fo.jobs = c.jobs;
  cs.system = assemble_stokes(sp, *pr.weights, c.nu, y0, fo);
  detail::solve_into(cs, c);
  cs.zspace = sp.z;
  cs.pspace = sp.p;
  cs.z = cs.system.field(cs.x, "z");
  cs.p = cs.system.field(cs.x, "p");
  cs.J = detail::flow_cost(cs);
  cs.divergence_residual = detail::flow_divergence_residual(cs);
  cs.y2_ratio = detail::flow_y2_ratio(cs);

  auto fo2 = detail::flow_forward_options(c, false);
  VectorFn v = [&cs](const Vec2& x, double t) { return cs.control(x, t); };
  auto fwd = flow_forward(c.L1, c.L2, c.T, c.nu, y0, v, Trajectory{}, fo2);
  auto unc = flow_forward(c.L1, c.L2, c.T, c.nu, y0, nullptr, Trajectory{}, fo2);
  cs.verification = std::move(fwd.history);
  cs.uncontrolled = std::move(unc.history);
  cs.y0_norm = cs.verification.state.front();
  return cs;
}

struct FixedPointResult {
  ControlSolution solution;  // for the deviation u = y - ybar
  FixedPointLog log;
};

inline Trajectory make_trajectory(const RunConfig& c) {
  Trajectory tr{trajectory_kind(c.trajectory)};
  tr.nu = c.nu;
  return tr;
}

// Relative L2(Q_T) distance of rho^{-2} z_a and rho^{-2} z_b.
inline double fixed_point_change(const TensorFemSpace& V, const WeightSet& ws, const VectorXd& za, const VectorXd& zb) {
  auto w4 = [&](const Vec2& x, double t) { return std::pow(ws.inv_weight(Weight::base, x, t), 4); };
  double d = l2_norm(V, za - zb, w4), n = l2_norm(V, za, w4);
  return n > 0 ? d / n : d;
}

// Oseen system for the deviation with transport field rho^{-2} z_prev (z_prev empty: no transport).
inline SaddleSystem assemble_fixed_point_step(const FlowSpaces& sp, const WeightSet& ws, const RunConfig& c,
                                              const Trajectory& tr, const VectorXd& z_prev) {
  VectorFn ybar = [tr](const Vec2& x, double t) { return tr(x, t); };
  VectorFn w;
  if (z_prev.size() > 0)
    w = [&](const Vec2& x, double t) {
      FieldValue f = evaluate(*sp.z, z_prev, x, t);
      double r = std::pow(ws.inv_weight(Weight::base, x, t), 2);
      return Vec2(r * f.value[0], r * f.value[1]);
    };
  PsiKind pk = psi_kind(c.psi);
  double M = c.M * c.y0_scale;
  auto u0 = [pk, M](const Vec2& x) { return curl_perturbation(pk, M, x); };
  FormOptions fo;
  fo.jobs = c.jobs;
  return assemble_oseen(sp, ws, c.nu, ybar, w, u0, fo);
}

// y0 = ybar(., 0) + M curl psi, the datum the forward check starts from.
inline std::function<Vec2(const Vec2&)> ns_initial_datum(const RunConfig& c) {
  Trajectory tr = make_trajectory(c);
  PsiKind pk = psi_kind(c.psi);
  double M = c.M * c.y0_scale;
  return [tr, pk, M](const Vec2& x) -> Vec2 { return tr(x, 0.0) + curl_perturbation(pk, M, x); };
}

// Fixed-point iteration on the Oseen linearization, u^0 = 0, u^{n+1} = rho^{-2} z.
inline FixedPointResult fixed_point_ns(const RunConfig& config, bool verify = true) {
  auto pr = detail::prepare(config);
  const RunConfig& c = pr.cfg;
  if (c.scenario != "navier_stokes") throw std::invalid_argument("pipeline: fixed point needs scenario = navier_stokes");
  Trajectory tr = make_trajectory(c);
  FlowSpaces sp = make_flow_spaces(pr.mesh, c.m, c.n);
  FixedPointResult res;
  ControlSolution& cs = res.solution;
  cs.scenario = "navier_stokes";
  cs.mesh = pr.mesh;
  cs.weights = pr.weights;
  cs.power = 2;
  cs.zspace = sp.z;
  cs.pspace = sp.p;

  VectorXd z_prev;  // empty: u^0 = 0
  int rising = 0;
  double prev_err = std::numeric_limits<double>::infinity();
  for (int n = 0; n < c.outer_max; ++n) {
    cs.system = assemble_fixed_point_step(sp, *pr.weights, c, tr, z_prev);
    detail::solve_into(cs, c);
    VectorXd z = cs.system.field(cs.x, "z");
    VectorXd zp = z_prev.size() ? z_prev : VectorXd(VectorXd::Zero(z.size()));
    double err = fixed_point_change(*sp.z, *pr.weights, z, zp);
    res.log.records.push_back({n + 1, err});
    rising = err >= prev_err ? rising + 1 : 0;
    prev_err = err;
    z_prev = std::move(z);
    if (err <= c.outer_tol) {
      res.log.converged = true;
      break;
    }
    if (rising >= 10) {
      res.log.stagnated = true;
      break;
    }
  }
  cs.z = z_prev;
  cs.p = cs.system.field(cs.x, "p");
  cs.J = detail::flow_cost(cs);
  cs.divergence_residual = detail::flow_divergence_residual(cs);
  cs.y2_ratio = detail::flow_y2_ratio(cs);

  if (verify) {
    auto y0 = ns_initial_datum(c);
    auto fo = detail::flow_forward_options(c, true);
    VectorFn v = [&cs](const Vec2& x, double t) { return cs.control(x, t); };
    auto fwd = flow_forward(c.L1, c.L2, c.T, c.nu, y0, v, tr, fo);
    auto unc = flow_forward(c.L1, c.L2, c.T, c.nu, y0, nullptr, tr, fo);
    cs.verification = std::move(fwd.history);
    cs.uncontrolled = std::move(unc.history);
    cs.y0_norm = cs.verification.deviation.front();
  }
  return res;
}

}  // namespace nullctl
