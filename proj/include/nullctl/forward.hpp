#pragma once

// Forward-in-time verification solvers on a spatial triangulation: Crank-Nicolson heat and
// Taylor-Hood Stokes/Navier-Stokes stepping, plus analytic trajectories.

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nullctl/fem.hpp"
#include "nullctl/forms.hpp"
#include "nullctl/linalg.hpp"

namespace nullctl {

// ---------------------------------------------------------------------------
// Trajectories and initial perturbations

enum class TrajectoryKind { zero, poiseuille, taylor_green, custom };

struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::zero;
  double nu = 1.0;   // Taylor-Green decay e^{-8 nu t}
  VectorFn custom;  // used when kind == custom

  Vec2 operator()(const Vec2& x, double t) const {
    switch (kind) {
      case TrajectoryKind::zero:
        return Vec2::Zero();
      case TrajectoryKind::poiseuille:
        return Vec2(4 * x.y() * (1 - x.y()), 0.0);
      case TrajectoryKind::taylor_green: {
        double e = std::exp(-8 * nu * t);
        return Vec2(std::sin(2 * x.x()) * std::cos(2 * x.y()) * e, -std::cos(2 * x.x()) * std::sin(2 * x.y()) * e);
      }
      case TrajectoryKind::custom:
        if (!custom) throw std::invalid_argument("trajectory: custom kind without a function");
        return custom(x, t);
    }
    return Vec2::Zero();
  }
};

inline Vec2 trajectory_eval(const Trajectory& traj, const Vec2& x, double t) { return traj(x, t); }

inline TrajectoryKind trajectory_kind(const std::string& s) {
  if (s == "zero") return TrajectoryKind::zero;
  if (s == "poiseuille") return TrajectoryKind::poiseuille;
  if (s == "taylor_green") return TrajectoryKind::taylor_green;
  if (s == "custom") return TrajectoryKind::custom;
  throw std::invalid_argument("trajectory: unknown kind '" + s + "'");
}

inline std::string to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::zero: return "zero";
    case TrajectoryKind::poiseuille: return "poiseuille";
    case TrajectoryKind::taylor_green: return "taylor_green";
    case TrajectoryKind::custom: return "custom";
  }
  return "";
}

// psi = (x1 x2)^2 ((l - x1)(l - x2))^2 on the box [0,l]^2, zero outside; l = 1 or pi.
enum class PsiKind { unit_box, pi_box };

inline PsiKind psi_kind(const std::string& s) {
  if (s == "unit_box") return PsiKind::unit_box;
  if (s == "pi_box") return PsiKind::pi_box;
  throw std::invalid_argument("curl_perturbation: unknown psi kind '" + s + "'");
}

inline std::string to_string(PsiKind k) { return k == PsiKind::unit_box ? "unit_box" : "pi_box"; }

// M * (d psi / dx2, -d psi / dx1).
inline Vec2 curl_perturbation(PsiKind kind, double M, const Vec2& x) {
  double l = kind == PsiKind::unit_box ? 1.0 : std::numbers::pi;
  double a = x.x(), b = x.y();
  if (a <= 0 || a >= l || b <= 0 || b >= l || M == 0) return Vec2::Zero();
  // psi = f(a) f(b), f(s) = s^2 (l - s)^2, f'(s) = 2 s (l - s)(l - 2 s).
  auto f = [l](double s) { return s * s * (l - s) * (l - s); };
  auto df = [l](double s) { return 2 * s * (l - s) * (l - 2 * s); };
  return M * Vec2(f(a) * df(b), -df(a) * f(b));
}

// ---------------------------------------------------------------------------
// Norm histories

struct NormHistory {
  std::vector<double> t;
  std::vector<double> control;    // |v(.,t)|_{L2(Omega)}
  std::vector<double> state;      // |y(.,t)|_{L2(Omega)}
  std::vector<double> deviation;  // |y(.,t) - ybar(.,t)|_{L2(Omega)}, flows only
  double max_divergence = 0;      // flows: max over steps of the weak divergence / |grad y|
  bool divergence_warning = false;
};

inline void write_heat_norms_csv(std::ostream& os, const NormHistory& h) {
  os << "t,control_norm,state_norm\n";
  char buf[128];
  for (size_t k = 0; k < h.t.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.8e,%.8e,%.8e\n", h.t[k], h.control[k], h.state[k]);
    os << buf;
  }
}

inline void write_flow_norms_csv(std::ostream& os, const NormHistory& h) {
  os << "t,deviation_norm\n";
  char buf[96];
  for (size_t k = 0; k < h.t.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.8e,%.8e\n", h.t[k], h.deviation[k]);
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// Spatial finite elements

namespace detail {

// Spatial Lagrange space of degree m, realized as the t-independent part of a tensor space.
inline SpacePtr spatial_space(int nx, int ny, double L1, double L2, int m, int components) {
  auto mesh = std::make_shared<const SpaceTimeMesh>(build_mesh(nx, ny, 1, L1, L2, 1.0, Rect{0, L1, 0, L2}));
  return build_space(mesh, m, 1, components, Constraint::none);
}

struct SpatialCell {
  TriangleMap map;
  std::vector<int> nodes;
  std::vector<Vec2> x;       // physical quadrature points
  std::vector<double> w;     // physical weights
  std::vector<Vec2> grad;    // nq * nl physical gradients
};

// Per-triangle quadrature data for a spatial space.
class SpatialCells {
 public:
  SpatialCells(const TensorFemSpace& V, int degree) : rule_(triangle_rule(degree)), tab_(V.tri_basis(), rule_.x) {
    const auto& M = V.mesh();
    cells_.resize(M.num_triangles());
    int nl = V.n_local_spatial();
    for (int t = 0; t < M.num_triangles(); ++t) {
      SpatialCell& c = cells_[t];
      c.map = triangle_map(M, t);
      c.nodes.resize(nl);
      V.spatial_nodes(t, c.nodes.data());
      for (int q = 0; q < tab_.nq; ++q) {
        c.x.push_back(c.map(rule_.x[q]));
        c.w.push_back(c.map.det * rule_.w[q]);
        for (int k = 0; k < nl; ++k) c.grad.push_back(c.map.JinvT * tab_.rgrad[q * nl + k]);
      }
    }
  }
  const SpatialCell& operator[](int t) const { return cells_[t]; }
  int size() const { return int(cells_.size()); }
  int nq() const { return tab_.nq; }
  int nl() const { return tab_.nl; }
  double val(int q, int k) const { return tab_.val[q * tab_.nl + k]; }
  const RuleTri& rule() const { return rule_; }

 private:
  RuleTri rule_;
  SpatialTable tab_;
  std::vector<SpatialCell> cells_;
};

// Scalar matrix sum_T sum_q w * (c0 phi_i phi_j + c1 grad phi_i . grad phi_j), coefficient c0(x).
inline SpMat scalar_matrix(const SpatialCells& C, int n, int jobs, const std::function<double(const Vec2&)>& c0,
                           double c1) {
  std::vector<Triplet> ta, tb;
  int nl = C.nl();
  parallel_cells(C.size(), jobs, ta, tb, [&](int b, int e, std::vector<Triplet>& out, std::vector<Triplet>&) {
    MatrixXd loc(nl, nl);
    for (int t = b; t < e; ++t) {
      const SpatialCell& c = C[t];
      loc.setZero();
      for (int q = 0; q < C.nq(); ++q) {
        double a = c0 ? c0(c.x[q]) : 0.0;
        for (int i = 0; i < nl; ++i)
          for (int j = 0; j < nl; ++j)
            loc(i, j) += c.w[q] * (a * C.val(q, i) * C.val(q, j) + c1 * c.grad[q * nl + i].dot(c.grad[q * nl + j]));
      }
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j) out.emplace_back(c.nodes[i], c.nodes[j], loc(i, j));
    }
  });
  SpMat A(n, n);
  A.setFromTriplets(ta.begin(), ta.end());
  return A;
}

// Load sum_T sum_q w f(x) phi_i for a scalar or vector source; triangles outside `support` skipped.
inline VectorXd load_vector(const SpatialCells& C, int n_scalar, int comps,
                            const std::function<void(const Vec2&, double*)>& f, const std::optional<Rect>& support) {
  VectorXd F = VectorXd::Zero(comps * n_scalar);
  int nl = C.nl();
  double val[2];
  for (int t = 0; t < C.size(); ++t) {
    const SpatialCell& c = C[t];
    if (support) {
      double x0 = c.x[0].x(), x1 = x0, y0 = c.x[0].y(), y1 = y0;
      for (const auto& p : c.x) x0 = std::min(x0, p.x()), x1 = std::max(x1, p.x()), y0 = std::min(y0, p.y()), y1 = std::max(y1, p.y());
      if (x1 < support->x0 || x0 > support->x1 || y1 < support->y0 || y0 > support->y1) continue;
    }
    for (int q = 0; q < C.nq(); ++q) {
      f(c.x[q], val);
      for (int d = 0; d < comps; ++d) {
        if (val[d] == 0.0) continue;
        for (int i = 0; i < nl; ++i) F[d * n_scalar + c.nodes[i]] += c.w[q] * val[d] * C.val(q, i);
      }
    }
  }
  return F;
}

// sqrt(int |u_h - g|^2) for a nodal field u (comps blocks) and optional exact g.
inline double spatial_l2(const SpatialCells& C, const VectorXd& u, int n_scalar, int comps,
                         const std::function<void(const Vec2&, double*)>& g) {
  double s = 0, gv[2] = {0, 0};
  int nl = C.nl();
  for (int t = 0; t < C.size(); ++t) {
    const SpatialCell& c = C[t];
    for (int q = 0; q < C.nq(); ++q) {
      if (g) g(c.x[q], gv);
      for (int d = 0; d < comps; ++d) {
        double v = 0;
        for (int i = 0; i < nl; ++i) v += u[d * n_scalar + c.nodes[i]] * C.val(q, i);
        double e = v - (g ? gv[d] : 0.0);
        s += c.w[q] * e * e;
      }
    }
  }
  return std::sqrt(s);
}

// Rows in `fixed` become identity rows.
inline SpMat dirichlet_rows(const SpMat& A, const std::vector<char>& fixed) {
  std::vector<Triplet> trip;
  trip.reserve(A.nonZeros());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      if (!fixed[it.row()]) trip.emplace_back(int(it.row()), int(it.col()), it.value());
  for (int i = 0; i < A.rows(); ++i)
    if (fixed[i]) trip.emplace_back(i, i, 1.0);
  SpMat R(A.rows(), A.cols());
  R.setFromTriplets(trip.begin(), trip.end());
  return R;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Heat

struct HeatForwardOptions {
  int nx = 32, ny = 32;
  int m = 2;
  int nt = 200;
  int rannacher_steps = 2;  // leading steps taken as two implicit Euler half steps
  bool time_dependent_G = false;
  std::optional<Rect> control_support;
  int jobs = 1;
};

struct HeatForwardResult {
  NormHistory history;
  SpacePtr space;
  VectorXd y_final;
  double y0_norm = 0;  // |y0|_{L2} of the datum itself
};

// y_t - Lap y + G y = v on Omega = (0,L1)x(0,L2), y = 0 on the boundary, y(0) = y0.
inline HeatForwardResult heat_forward_cn(double L1, double L2, double T, const std::function<double(const Vec2&)>& y0,
                                         const ScalarFn& G, const ScalarFn& v, const HeatForwardOptions& opt = {}) {
  if (opt.nt < 1 || !(T > 0)) throw std::invalid_argument("heat_forward_cn: nt and T must be positive");
  HeatForwardResult res;
  res.space = detail::spatial_space(opt.nx, opt.ny, L1, L2, opt.m, 1);
  const TensorFemSpace& V = *res.space;
  int n = V.n_spatial();
  detail::SpatialCells C(V, 2 * opt.m + 2);
  SpMat M = detail::scalar_matrix(C, n, opt.jobs, [](const Vec2&) { return 1.0; }, 0.0);
  SpMat K = detail::scalar_matrix(C, n, opt.jobs, nullptr, 1.0);
  auto mass_G = [&](double t) {
    return detail::scalar_matrix(C, n, opt.jobs, [&](const Vec2& x) { return G ? G(x, t) : 0.0; }, 0.0);
  };
  auto load = [&](double t) {
    if (!v) return VectorXd(VectorXd::Zero(n));
    return detail::load_vector(C, n, 1, [&](const Vec2& x, double* o) { o[0] = v(x, t); }, opt.control_support);
  };
  auto control_norm = [&](double t) {
    if (!v) return 0.0;
    double s = 0;
    for (int tr = 0; tr < C.size(); ++tr)
      for (int q = 0; q < C.nq(); ++q) {
        double a = v(C[tr].x[q], t);
        s += C[tr].w[q] * a * a;
      }
    return std::sqrt(s);
  };

  std::vector<char> fixed(n, 0);
  for (int s = 0; s < n; ++s) fixed[s] = V.spatial_on_boundary(s);
  VectorXd y(n);
  for (int s = 0; s < n; ++s) y[s] = fixed[s] ? 0.0 : y0(V.spatial_coord(s));
  {
    double s = 0;
    for (int tr = 0; tr < C.size(); ++tr)
      for (int q = 0; q < C.nq(); ++q) {
        double a = y0(C[tr].x[q]);
        s += C[tr].w[q] * a * a;
      }
    res.y0_norm = std::sqrt(s);
  }

  auto record = [&](double t) {
    res.history.t.push_back(t);
    res.history.control.push_back(control_norm(t));
    res.history.state.push_back(std::sqrt(std::max(0.0, y.dot(M * y))));
  };
  record(0.0);

  double dt = T / opt.nt;
  SpMat MG0 = mass_G(0.0);
  VectorXd F0 = load(0.0);
  SparseLUSolver lu_cn, lu_be;
  bool have_cn = false, have_be = false;
  for (int k = 0; k < opt.nt; ++k) {
    double t0 = k * dt, t1 = k + 1 == opt.nt ? T : (k + 1) * dt;
    if (k < opt.rannacher_steps) {
      // Two implicit Euler half steps.
      double h = 0.5 * (t1 - t0);
      for (int sub = 1; sub <= 2; ++sub) {
        double ts = t0 + sub * h;
        SpMat MGs = opt.time_dependent_G ? mass_G(ts) : MG0;
        if (!have_be || opt.time_dependent_G) {
          lu_be.compute(detail::dirichlet_rows(SpMat(M + h * (K + MGs)), fixed));
          have_be = true;
        }
        VectorXd rhs = M * y + h * load(ts);
        for (int s = 0; s < n; ++s)
          if (fixed[s]) rhs[s] = 0.0;
        y = lu_be.solve(rhs);
      }
      F0 = load(t1);
      if (opt.time_dependent_G) MG0 = mass_G(t1);
    } else {
      SpMat MG1 = opt.time_dependent_G ? mass_G(t1) : MG0;
      VectorXd F1 = load(t1);
      if (!have_cn || opt.time_dependent_G) {
        lu_cn.compute(detail::dirichlet_rows(SpMat(M + 0.5 * dt * (K + MG1)), fixed));
        have_cn = true;
      }
      VectorXd rhs = M * y - 0.5 * dt * ((K + MG0) * y) + 0.5 * dt * (F0 + F1);
      for (int s = 0; s < n; ++s)
        if (fixed[s]) rhs[s] = 0.0;
      y = lu_cn.solve(rhs);
      F0 = F1;
      MG0 = MG1;
    }
    record(t1);
  }
  res.y_final = y;
  return res;
}

// ---------------------------------------------------------------------------
// Stokes / Navier-Stokes

struct FlowForwardOptions {
  int nx = 32, ny = 32;
  int nt = 100;
  bool nonlinear = true;
  std::optional<Rect> control_support;
  double divergence_tol = 1e-3;
  int jobs = 1;
};

struct FlowForwardResult {
  NormHistory history;
  SpacePtr velocity, pressure;
  VectorXd y_final;
};

// y_t - nu Lap y [+ (y.grad) y] + grad pi = v, div y = 0, y = ybar on the boundary, y(0) = y0.
// Taylor-Hood P2/P1 with zero-mean pressure; Crank-Nicolson viscous term and, when nonlinear,
// convection linearized about the extrapolated velocity (3 y^k - y^{k-1}) / 2.
inline FlowForwardResult flow_forward(double L1, double L2, double T, double nu,
                                      const std::function<Vec2(const Vec2&)>& y0, const VectorFn& v,
                                      const Trajectory& traj, const FlowForwardOptions& opt = {}) {
  if (opt.nt < 1 || !(T > 0) || !(nu > 0)) throw std::invalid_argument("flow_forward: nt, T, nu must be positive");
  FlowForwardResult res;
  res.velocity = detail::spatial_space(opt.nx, opt.ny, L1, L2, 2, 2);
  res.pressure = build_space(res.velocity->mesh_ptr(), 1, 1, 1, Constraint::none);
  const TensorFemSpace& V = *res.velocity;
  const TensorFemSpace& P = *res.pressure;
  const int n2 = V.n_spatial(), n1 = P.n_spatial(), nu_dofs = 2 * n2, N = nu_dofs + n1;
  detail::SpatialCells C(V, 6);
  detail::SpatialCells CP(P, 6);  // same rule, pressure basis

  SpMat Ms = detail::scalar_matrix(C, n2, opt.jobs, [](const Vec2&) { return 1.0; }, 0.0);
  SpMat Ks = detail::scalar_matrix(C, n2, opt.jobs, nullptr, 1.0);

  // D(i, c*n2 + j) = int q_i d_c phi_j; pressure means m_i = int q_i.
  std::vector<Triplet> dtrip;
  VectorXd pmean = VectorXd::Zero(n1);
  for (int t = 0; t < C.size(); ++t) {
    const auto& cv = C[t];
    const auto& cp = CP[t];
    for (int q = 0; q < C.nq(); ++q)
      for (int i = 0; i < CP.nl(); ++i) {
        double qi = CP.val(q, i) * cv.w[q];
        pmean[cp.nodes[i]] += qi;
        for (int j = 0; j < C.nl(); ++j)
          for (int c = 0; c < 2; ++c) dtrip.emplace_back(cp.nodes[i], c * n2 + cv.nodes[j], qi * cv.grad[q * C.nl() + j][c]);
      }
  }
  SpMat D(n1, nu_dofs);
  D.setFromTriplets(dtrip.begin(), dtrip.end());

  std::vector<char> fixed(N, 0);
  for (int s = 0; s < n2; ++s)
    if (V.spatial_on_boundary(s)) fixed[s] = fixed[n2 + s] = 1;
  fixed[nu_dofs] = 1;  // pressure gauge; only the velocity is used downstream

  auto convection = [&](const VectorXd& w) {
    // int (w . grad phi_j) phi_i, scalar block.
    std::vector<Triplet> ta, tb;
    int nl = C.nl();
    detail::parallel_cells(C.size(), opt.jobs, ta, tb, [&](int b, int e, std::vector<Triplet>& out, std::vector<Triplet>&) {
      MatrixXd loc(nl, nl);
      for (int t = b; t < e; ++t) {
        const auto& c = C[t];
        loc.setZero();
        for (int q = 0; q < C.nq(); ++q) {
          Vec2 wq = Vec2::Zero();
          for (int k = 0; k < nl; ++k) wq += C.val(q, k) * Vec2(w[c.nodes[k]], w[n2 + c.nodes[k]]);
          for (int i = 0; i < nl; ++i)
            for (int j = 0; j < nl; ++j) loc(i, j) += c.w[q] * C.val(q, i) * wq.dot(c.grad[q * nl + j]);
        }
        for (int i = 0; i < nl; ++i)
          for (int j = 0; j < nl; ++j) out.emplace_back(c.nodes[i], c.nodes[j], loc(i, j));
      }
    });
    SpMat A(n2, n2);
    A.setFromTriplets(ta.begin(), ta.end());
    return A;
  };

  // [Avel, -D^T; -D, 0] with Dirichlet velocity rows and one pinned pressure node.
  auto system = [&](const SpMat& Avel) {
    std::vector<Triplet> trip;
    for (int k = 0; k < Avel.outerSize(); ++k)
      for (SpMat::InnerIterator it(Avel, k); it; ++it)
        for (int c = 0; c < 2; ++c) trip.emplace_back(c * n2 + int(it.row()), c * n2 + int(it.col()), it.value());
    for (int k = 0; k < D.outerSize(); ++k)
      for (SpMat::InnerIterator it(D, k); it; ++it) {
        trip.emplace_back(int(it.col()), nu_dofs + int(it.row()), -it.value());
        trip.emplace_back(nu_dofs + int(it.row()), int(it.col()), -it.value());
      }
    SpMat K(N, N);
    K.setFromTriplets(trip.begin(), trip.end());
    return detail::dirichlet_rows(K, fixed);
  };
  auto set_boundary = [&](VectorXd& rhs, double t) {
    for (int s = 0; s < n2; ++s)
      if (fixed[s]) {
        Vec2 g = traj(V.spatial_coord(s), t);
        rhs[s] = g.x();
        rhs[n2 + s] = g.y();
      }
  };
  auto block = [&](const SpMat& A, const VectorXd& u) {
    VectorXd r(nu_dofs);
    r.head(n2) = A * u.head(n2);
    r.tail(n2) = A * u.tail(n2);
    return r;
  };
  auto load = [&](double t) {
    if (!v) return VectorXd(VectorXd::Zero(nu_dofs));
    return detail::load_vector(C, n2, 2, [&](const Vec2& x, double* o) {
      Vec2 a = v(x, t);
      o[0] = a.x();
      o[1] = a.y();
    }, opt.control_support);
  };

  // Initial velocity: discrete L2 projection of y0 onto weakly divergence-free fields.
  VectorXd u(nu_dofs);
  {
    VectorXd yi(nu_dofs);
    for (int s = 0; s < n2; ++s) {
      Vec2 a = y0(V.spatial_coord(s));
      yi[s] = a.x();
      yi[n2 + s] = a.y();
    }
    SparseLUSolver lu;
    if (!lu.compute(system(Ms))) throw std::runtime_error("flow_forward: projection factorization failed");
    VectorXd rhs = VectorXd::Zero(N);
    rhs.head(nu_dofs) = block(Ms, yi);
    set_boundary(rhs, 0.0);
    u = lu.solve(rhs).head(nu_dofs);
  }

  // Weak divergence |D w|_{M_p^{-1}} (lumped pressure mass) relative to |grad w|.
  auto divergence = [&](const VectorXd& w) {
    VectorXd r = D * w;
    double dv = 0;
    for (int i = 0; i < n1; ++i) dv += r[i] * r[i] / pmean[i];
    double gr = w.head(n2).dot(Ks * w.head(n2)) + w.tail(n2).dot(Ks * w.tail(n2));
    return gr > 0 ? std::sqrt(dv / gr) : std::sqrt(dv);
  };
  auto record = [&](double t) {
    auto& h = res.history;
    h.t.push_back(t);
    double cn = 0;
    if (v) {
      for (int tr = 0; tr < C.size(); ++tr)
        for (int q = 0; q < C.nq(); ++q) cn += C[tr].w[q] * v(C[tr].x[q], t).squaredNorm();
    }
    h.control.push_back(std::sqrt(cn));
    h.state.push_back(detail::spatial_l2(C, u, n2, 2, nullptr));
    h.deviation.push_back(detail::spatial_l2(C, u, n2, 2, [&](const Vec2& x, double* o) {
      Vec2 a = traj(x, t);
      o[0] = a.x();
      o[1] = a.y();
    }));
    double d = divergence(u);
    h.max_divergence = std::max(h.max_divergence, d);
    if (d > opt.divergence_tol) h.divergence_warning = true;
  };
  record(0.0);

  double dt = T / opt.nt;
  SpMat Acn = SpMat(Ms / dt + 0.5 * nu * Ks);
  SpMat Aex = SpMat(Ms / dt - 0.5 * nu * Ks);
  SparseLUSolver lu;
  if (!opt.nonlinear && !lu.compute(system(Acn))) throw std::runtime_error("flow_forward: factorization failed");
  VectorXd u_prev = u, F0 = load(0.0);
  for (int k = 0; k < opt.nt; ++k) {
    double t1 = k + 1 == opt.nt ? T : (k + 1) * dt;
    VectorXd F1 = load(t1);
    VectorXd rhs = VectorXd::Zero(N);
    rhs.head(nu_dofs) = block(Aex, u) + 0.5 * (F0 + F1);
    if (opt.nonlinear) {
      VectorXd w = k == 0 ? u : VectorXd(1.5 * u - 0.5 * u_prev);
      SpMat Cw = convection(w);
      rhs.head(nu_dofs) -= 0.5 * block(Cw, u);
      if (!lu.refactor(system(SpMat(Acn + 0.5 * Cw)))) throw std::runtime_error("flow_forward: factorization failed");
    }
    set_boundary(rhs, t1);
    VectorXd sol = lu.solve(rhs);
    if (!sol.allFinite()) throw std::runtime_error("flow_forward: non-finite velocity");
    u_prev = u;
    u = sol.head(nu_dofs);
    F0 = F1;
    record(t1);
  }
  res.y_final = u;
  return res;
}

}  // namespace nullctl
