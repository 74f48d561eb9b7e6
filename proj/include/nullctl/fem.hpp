#pragma once

// Tensor-product Lagrange spaces P_m(triangle) x P_n(interval) on prisms.

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "nullctl/mesh.hpp"

namespace nullctl {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// ---------------------------------------------------------------------------
// Quadrature

struct Rule1D {
  std::vector<double> x, w;  // on [0,1]
};

struct RuleTri {
  std::vector<Vec2> x;  // reference triangle (0,0),(1,0),(0,1)
  std::vector<double> w;
};

inline Rule1D gauss_legendre(int npts) {
  Rule1D r;
  r.x.resize(npts);
  r.w.resize(npts);
  for (int i = 0; i < npts; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (npts + 0.5));
    double dp = 1;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = z;
      for (int k = 2; k <= npts; ++k) {
        double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = npts * (z * p1 - p0) / (z * z - 1);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1, p1 = z;
      for (int k = 2; k <= npts; ++k) {
        double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = npts * (z * p1 - p0) / (z * z - 1);
    }
    // Map [-1,1] -> [0,1], ascending.
    r.x[npts - 1 - i] = 0.5 * (1 + z);
    r.w[npts - 1 - i] = 1.0 / ((1 - z * z) * dp * dp);
  }
  return r;
}

// Exact for polynomials of degree <= deg on [0,1].
inline Rule1D interval_rule(int deg) { return gauss_legendre(std::max(1, (deg + 2) / 2)); }

// Collapsed Gauss rule, exact for total degree <= deg; weights sum to 1/2.
inline RuleTri triangle_rule(int deg) {
  Rule1D ru = gauss_legendre(std::max(1, (deg + 2) / 2));
  Rule1D rv = gauss_legendre(std::max(1, (deg + 3) / 2));
  RuleTri r;
  for (size_t j = 0; j < rv.x.size(); ++j)
    for (size_t i = 0; i < ru.x.size(); ++i) {
      double v = rv.x[j], u = ru.x[i];
      r.x.emplace_back(u * (1 - v), v);
      r.w.push_back(ru.w[i] * rv.w[j] * (1 - v));
    }
  return r;
}

struct QuadratureRule {
  int dx = 0, dt = 0;
  RuleTri tri;
  Rule1D time;
  Rule1D time_final;  // final slab, degree dt + 2

  const Rule1D& time_rule(bool final_slab) const { return final_slab ? time_final : time; }
};

inline QuadratureRule make_quadrature(int dx, int dt) {
  QuadratureRule q;
  q.dx = dx;
  q.dt = dt;
  q.tri = triangle_rule(dx);
  q.time = interval_rule(dt);
  q.time_final = interval_rule(dt + 2);
  return q;
}

// ---------------------------------------------------------------------------
// Reference bases

class RefTriangle {
 public:
  explicit RefTriangle(int m) : m_(m) {
    if (m < 1) throw std::invalid_argument("fem: spatial degree must be >= 1");
    for (int b = 0; b <= m; ++b)
      for (int a = 0; a + b <= m; ++a) lattice_.push_back({a, b});
    int N = size();
    MatrixXd V(N, N);
    for (int k = 0; k < N; ++k) {
      double xi = double(lattice_[k][0]) / m, eta = double(lattice_[k][1]) / m;
      for (int j = 0; j < N; ++j) V(k, j) = std::pow(xi, lattice_[j][0]) * std::pow(eta, lattice_[j][1]);
    }
    coef_ = V.fullPivLu().inverse();
  }

  int degree() const { return m_; }
  int size() const { return static_cast<int>(lattice_.size()); }
  // Lattice (a,b): node at (a/m, b/m).
  const std::vector<std::array<int, 2>>& lattice() const { return lattice_; }

  void eval(const Vec2& p, double* val, Vec2* grad) const {
    int N = size();
    // Monomials and derivatives.
    std::vector<double> xp(m_ + 1, 1.0), ep(m_ + 1, 1.0);
    for (int k = 1; k <= m_; ++k) xp[k] = xp[k - 1] * p.x(), ep[k] = ep[k - 1] * p.y();
    VectorXd mono(N), mx(N), my(N);
    for (int j = 0; j < N; ++j) {
      int a = lattice_[j][0], b = lattice_[j][1];
      mono[j] = xp[a] * ep[b];
      mx[j] = a ? a * xp[a - 1] * ep[b] : 0.0;
      my[j] = b ? b * xp[a] * ep[b - 1] : 0.0;
    }
    for (int k = 0; k < N; ++k) {
      double v = 0, gx = 0, gy = 0;
      for (int j = 0; j < N; ++j) {
        double c = coef_(j, k);
        v += c * mono[j];
        gx += c * mx[j];
        gy += c * my[j];
      }
      if (val) val[k] = v;
      if (grad) grad[k] = Vec2(gx, gy);
    }
  }

 private:
  int m_;
  std::vector<std::array<int, 2>> lattice_;
  MatrixXd coef_;
};

class RefInterval {
 public:
  explicit RefInterval(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("fem: temporal degree must be >= 1");
  }
  int degree() const { return n_; }
  int size() const { return n_ + 1; }

  void eval(double s, double* val, double* der) const {
    for (int a = 0; a <= n_; ++a) {
      double xa = double(a) / n_;
      double v = 1, d = 0;
      for (int b = 0; b <= n_; ++b) {
        if (b == a) continue;
        double xb = double(b) / n_;
        double f = (s - xb) / (xa - xb);
        d = d * f + v / (xa - xb);
        v *= f;
      }
      if (val) val[a] = v;
      if (der) der[a] = d;
    }
  }

 private:
  int n_;
};

// ---------------------------------------------------------------------------
// Tensor space

enum class Constraint { none, zero_lateral, zero_lateral_final, zero_mean_slice };

class TensorFemSpace {
 public:
  TensorFemSpace(std::shared_ptr<const SpaceTimeMesh> mesh, int m, int n, int components, Constraint c)
      : mesh_(std::move(mesh)), tri_(m), time_(n), m_(m), n_(n), comps_(components), constraint_(c) {
    if (!mesh_) throw std::invalid_argument("fem: null mesh");
    if (components < 1 || components > 2) throw std::invalid_argument("fem: components must be 1 or 2");
    const auto& M = *mesh_;
    nsx_ = m * M.nx + 1;
    nsy_ = m * M.ny + 1;
    n_spatial_ = nsx_ * nsy_;
    n_temporal_ = n * M.nt + 1;
    n_scalar_ = n_spatial_ * n_temporal_;
    n_dofs_ = comps_ * n_scalar_;

    spatial_coords_.resize(n_spatial_);
    spatial_boundary_.assign(n_spatial_, 0);
    for (int J = 0; J < nsy_; ++J)
      for (int I = 0; I < nsx_; ++I) {
        int s = J * nsx_ + I;
        double x = I == nsx_ - 1 ? M.L1 : I * M.hx / m;
        double y = J == nsy_ - 1 ? M.L2 : J * M.hy / m;
        spatial_coords_[s] = Vec2(x, y);
        spatial_boundary_[s] = I == 0 || J == 0 || I == nsx_ - 1 || J == nsy_ - 1;
      }
    temporal_coords_.resize(n_temporal_);
    for (int k = 0; k < n_temporal_; ++k) temporal_coords_[k] = k == n_temporal_ - 1 ? M.T : k * M.dt / n;

    fixed_.assign(n_dofs_, 0);
    for (int c = 0; c < comps_; ++c)
      for (int k = 0; k < n_temporal_; ++k)
        for (int s = 0; s < n_spatial_; ++s) {
          bool f = false;
          if (constraint_ == Constraint::zero_lateral || constraint_ == Constraint::zero_lateral_final)
            f = spatial_boundary_[s];
          if (constraint_ == Constraint::zero_lateral_final && k == n_temporal_ - 1) f = true;
          fixed_[dof(c, k, s)] = f;
        }
    free_index_.assign(n_dofs_, -1);
    for (int d = 0; d < n_dofs_; ++d)
      if (!fixed_[d]) {
        free_index_[d] = static_cast<int>(free_dofs_.size());
        free_dofs_.push_back(d);
      }

    // Per-node spatial integrals for slice means.
    slice_weights_.assign(n_spatial_, 0.0);
    RuleTri q = triangle_rule(2 * m + 2);
    std::vector<double> val(tri_.size());
    std::vector<int> nodes(tri_.size());
    for (int t = 0; t < M.num_triangles(); ++t) {
      spatial_nodes(t, nodes.data());
      double area = M.triangle_area(t);
      for (size_t iq = 0; iq < q.x.size(); ++iq) {
        tri_.eval(q.x[iq], val.data(), nullptr);
        for (int k = 0; k < tri_.size(); ++k) slice_weights_[nodes[k]] += 2 * area * q.w[iq] * val[k];
      }
    }
  }

  const SpaceTimeMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const SpaceTimeMesh>& mesh_ptr() const { return mesh_; }
  int m() const { return m_; }
  int n() const { return n_; }
  int components() const { return comps_; }
  Constraint constraint() const { return constraint_; }
  const RefTriangle& tri_basis() const { return tri_; }
  const RefInterval& time_basis() const { return time_; }

  int n_spatial() const { return n_spatial_; }
  int n_temporal() const { return n_temporal_; }
  int n_scalar() const { return n_scalar_; }
  int n_dofs() const { return n_dofs_; }
  int n_free() const { return static_cast<int>(free_dofs_.size()); }
  int nsx() const { return nsx_; }
  int nsy() const { return nsy_; }

  int dof(int comp, int tnode, int snode) const { return comp * n_scalar_ + tnode * n_spatial_ + snode; }
  int comp_of(int d) const { return d / n_scalar_; }
  int tnode_of(int d) const { return (d % n_scalar_) / n_spatial_; }
  int snode_of(int d) const { return d % n_spatial_; }

  const Vec2& spatial_coord(int s) const { return spatial_coords_[s]; }
  double temporal_coord(int k) const { return temporal_coords_[k]; }
  bool spatial_on_boundary(int s) const { return spatial_boundary_[s]; }
  bool is_fixed(int d) const { return fixed_[d]; }
  int free_index(int d) const { return free_index_[d]; }
  const std::vector<int>& free_dofs() const { return free_dofs_; }
  const std::vector<double>& slice_weights() const { return slice_weights_; }

  int n_local_spatial() const { return tri_.size(); }
  int n_local_temporal() const { return time_.size(); }
  int n_local() const { return tri_.size() * time_.size(); }

  // Global spatial node indices of a triangle's lattice, in RefTriangle order.
  void spatial_nodes(int tri, int* out) const {
    auto [i, j] = mesh_->triangle_square(tri);
    int kind = SpaceTimeMesh::triangle_kind(tri);
    const auto& lat = tri_.lattice();
    for (int k = 0; k < tri_.size(); ++k) {
      int a = lat[k][0], b = lat[k][1];
      int I = m_ * i + (kind == 0 ? a + b : a);
      int J = m_ * j + (kind == 0 ? b : a + b);
      out[k] = J * nsx_ + I;
    }
  }

  // Scalar DOFs of a prism (component 0), local index a * n_local_spatial + k.
  void cell_dofs(int prism, std::vector<int>& out) const {
    const Prism& P = mesh_->prisms[prism];
    int nls = n_local_spatial();
    std::vector<int> nodes(nls);
    spatial_nodes(P.triangle, nodes.data());
    out.resize(n_local());
    for (int a = 0; a <= n_; ++a)
      for (int k = 0; k < nls; ++k) out[a * nls + k] = (n_ * P.slab + a) * n_spatial_ + nodes[k];
  }

  // Zeroes fixed DOFs and removes slice means; idempotent.
  void apply_constraint(VectorXd& u) const {
    for (int d = 0; d < n_dofs_; ++d)
      if (fixed_[d]) u[d] = 0.0;
    if (constraint_ == Constraint::zero_mean_slice) {
      double wsum = 0;
      for (double w : slice_weights_) wsum += w;
      for (int c = 0; c < comps_; ++c)
        for (int k = 0; k < n_temporal_; ++k) {
          double mean = 0;
          for (int s = 0; s < n_spatial_; ++s) mean += slice_weights_[s] * u[dof(c, k, s)];
          mean /= wsum;
          for (int s = 0; s < n_spatial_; ++s) u[dof(c, k, s)] -= mean;
        }
    }
  }

  // Full-length vector from free-DOF values, and back.
  VectorXd expand(const VectorXd& free) const {
    VectorXd u = VectorXd::Zero(n_dofs_);
    for (int i = 0; i < n_free(); ++i) u[free_dofs_[i]] = free[i];
    return u;
  }
  VectorXd restrict_free(const VectorXd& full) const {
    VectorXd f(n_free());
    for (int i = 0; i < n_free(); ++i) f[i] = full[free_dofs_[i]];
    return f;
  }

 private:
  std::shared_ptr<const SpaceTimeMesh> mesh_;
  RefTriangle tri_;
  RefInterval time_;
  int m_, n_, comps_;
  Constraint constraint_;
  int nsx_ = 0, nsy_ = 0, n_spatial_ = 0, n_temporal_ = 0, n_scalar_ = 0, n_dofs_ = 0;
  std::vector<Vec2> spatial_coords_;
  std::vector<char> spatial_boundary_;
  std::vector<double> temporal_coords_;
  std::vector<char> fixed_;
  std::vector<int> free_index_;
  std::vector<int> free_dofs_;
  std::vector<double> slice_weights_;
};

using SpacePtr = std::shared_ptr<const TensorFemSpace>;

inline SpacePtr build_space(std::shared_ptr<const SpaceTimeMesh> mesh, int m, int n, int components,
                            Constraint c) {
  return std::make_shared<const TensorFemSpace>(std::move(mesh), m, n, components, c);
}

// ---------------------------------------------------------------------------
// Affine maps and basis tables

struct TriangleMap {
  Vec2 v0;
  Eigen::Matrix2d J, JinvT;
  double det = 0;

  Vec2 operator()(const Vec2& ref) const { return v0 + J * ref; }
};

inline TriangleMap triangle_map(const SpaceTimeMesh& m, int tri) {
  const auto& t = m.triangles[tri];
  TriangleMap f;
  f.v0 = m.vertices[t[0]];
  f.J.col(0) = m.vertices[t[1]] - f.v0;
  f.J.col(1) = m.vertices[t[2]] - f.v0;
  f.det = std::abs(f.J.determinant());
  f.JinvT = f.J.inverse().transpose();
  return f;
}

// Reference spatial basis at a set of reference points.
struct SpatialTable {
  int nq = 0, nl = 0;
  std::vector<double> val;  // nq * nl
  std::vector<Vec2> rgrad;  // reference gradients

  SpatialTable() = default;
  SpatialTable(const RefTriangle& b, const std::vector<Vec2>& pts) : nq(int(pts.size())), nl(b.size()) {
    val.resize(nq * nl);
    rgrad.resize(nq * nl);
    for (int q = 0; q < nq; ++q) b.eval(pts[q], &val[q * nl], &rgrad[q * nl]);
  }
};

struct TemporalTable {
  int nq = 0, nl = 0;
  std::vector<double> val, der;  // der w.r.t. reference coordinate

  TemporalTable() = default;
  TemporalTable(const RefInterval& b, const std::vector<double>& pts) : nq(int(pts.size())), nl(b.size()) {
    val.resize(nq * nl);
    der.resize(nq * nl);
    for (int q = 0; q < nq; ++q) b.eval(pts[q], &val[q * nl], &der[q * nl]);
  }
};

// ---------------------------------------------------------------------------
// Point evaluation

struct FieldValue {
  double value[2] = {0, 0};
  Vec2 grad[2] = {Vec2::Zero(), Vec2::Zero()};
  double dt[2] = {0, 0};
};

inline FieldValue evaluate_at(const TensorFemSpace& V, const VectorXd& u, const Location& loc) {
  const auto& M = V.mesh();
  int nls = V.n_local_spatial(), nlt = V.n_local_temporal();
  std::vector<double> sv(nls), tv(nlt), td(nlt);
  std::vector<Vec2> sg(nls);
  Vec2 ref(loc.bary[1], loc.bary[2]);
  V.tri_basis().eval(ref, sv.data(), sg.data());
  V.time_basis().eval(loc.tau, tv.data(), td.data());
  TriangleMap f = triangle_map(M, loc.triangle);
  std::vector<int> dofs;
  V.cell_dofs(loc.prism, dofs);
  FieldValue r;
  for (int c = 0; c < V.components(); ++c)
    for (int a = 0; a < nlt; ++a)
      for (int k = 0; k < nls; ++k) {
        double coef = u[c * V.n_scalar() + dofs[a * nls + k]];
        r.value[c] += coef * sv[k] * tv[a];
        r.grad[c] += coef * tv[a] * (f.JinvT * sg[k]);
        r.dt[c] += coef * sv[k] * td[a] / M.dt;
      }
  return r;
}

inline FieldValue evaluate(const TensorFemSpace& V, const VectorXd& u, const Vec2& x, double t) {
  return evaluate_at(V, u, locate(V.mesh(), x, t));
}

// Nodal interpolation of f(x,t) (one value per component).
inline VectorXd interpolate(const TensorFemSpace& V,
                            const std::function<void(const Vec2&, double, double*)>& f) {
  VectorXd u(V.n_dofs());
  double val[2];
  for (int k = 0; k < V.n_temporal(); ++k)
    for (int s = 0; s < V.n_spatial(); ++s) {
      f(V.spatial_coord(s), V.temporal_coord(k), val);
      for (int c = 0; c < V.components(); ++c) u[V.dof(c, k, s)] = val[c];
    }
  return u;
}

inline VectorXd interpolate_scalar(const TensorFemSpace& V, const std::function<double(const Vec2&, double)>& f) {
  return interpolate(V, [&](const Vec2& x, double t, double* v) { v[0] = f(x, t); });
}

// ---------------------------------------------------------------------------
// Norms and mass matrices

using PointWeight = std::function<double(const Vec2&, double)>;

inline QuadratureRule default_quadrature(const TensorFemSpace& V) {
  return make_quadrature(2 * V.m() + 2, 2 * V.n() + 2);
}

// sqrt(int int w |u|^2 dx dt).
inline double l2_norm(const TensorFemSpace& V, const VectorXd& u, const PointWeight& w = nullptr,
                      const QuadratureRule* rule = nullptr) {
  QuadratureRule q = rule ? *rule : default_quadrature(V);
  const auto& M = V.mesh();
  SpatialTable st(V.tri_basis(), q.tri.x);
  TemporalTable tt[2] = {TemporalTable(V.time_basis(), q.time.x), TemporalTable(V.time_basis(), q.time_final.x)};
  int nls = V.n_local_spatial(), nlt = V.n_local_temporal();
  std::vector<int> dofs;
  double sum = 0;
  for (int p = 0; p < M.num_prisms(); ++p) {
    const Prism& P = M.prisms[p];
    bool fin = P.slab == M.nt - 1;
    const Rule1D& rt = q.time_rule(fin);
    const TemporalTable& T = tt[fin];
    TriangleMap f = triangle_map(M, P.triangle);
    V.cell_dofs(p, dofs);
    double t0 = M.time_nodes[P.slab];
    for (int iq = 0; iq < st.nq; ++iq) {
      Vec2 x = f(q.tri.x[iq]);
      for (int jq = 0; jq < T.nq; ++jq) {
        double t = t0 + rt.x[jq] * M.dt;
        double wt = f.det * q.tri.w[iq] * M.dt * rt.w[jq];
        double ww = w ? w(x, t) : 1.0;
        if (ww == 0.0) continue;
        for (int c = 0; c < V.components(); ++c) {
          double v = 0;
          for (int a = 0; a < nlt; ++a)
            for (int k = 0; k < nls; ++k)
              v += u[c * V.n_scalar() + dofs[a * nls + k]] * st.val[iq * nls + k] * T.val[jq * nlt + a];
          sum += wt * ww * v * v;
        }
      }
    }
  }
  return std::sqrt(sum);
}

// Consistent L2(Q_T) mass matrix over all DOFs (block diagonal in components).
inline SpMat mass_matrix(const TensorFemSpace& V) {
  QuadratureRule q = default_quadrature(V);
  const auto& M = V.mesh();
  SpatialTable st(V.tri_basis(), q.tri.x);
  TemporalTable tt[2] = {TemporalTable(V.time_basis(), q.time.x), TemporalTable(V.time_basis(), q.time_final.x)};
  int nls = V.n_local_spatial(), nlt = V.n_local_temporal(), nl = V.n_local();
  std::vector<int> dofs;
  std::vector<Triplet> trip;
  MatrixXd loc(nl, nl);
  for (int p = 0; p < M.num_prisms(); ++p) {
    const Prism& P = M.prisms[p];
    bool fin = P.slab == M.nt - 1;
    const Rule1D& rt = q.time_rule(fin);
    const TemporalTable& T = tt[fin];
    double det = M.triangle_area(P.triangle) * 2;
    V.cell_dofs(p, dofs);
    loc.setZero();
    for (int iq = 0; iq < st.nq; ++iq)
      for (int jq = 0; jq < T.nq; ++jq) {
        double wt = det * q.tri.w[iq] * M.dt * rt.w[jq];
        for (int i = 0; i < nl; ++i) {
          double vi = st.val[iq * nls + i % nls] * T.val[jq * nlt + i / nls];
          if (vi == 0.0) continue;
          for (int j = 0; j < nl; ++j)
            loc(i, j) += wt * vi * st.val[iq * nls + j % nls] * T.val[jq * nlt + j / nls];
        }
      }
    for (int c = 0; c < V.components(); ++c)
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j)
          trip.emplace_back(c * V.n_scalar() + dofs[i], c * V.n_scalar() + dofs[j], loc(i, j));
  }
  SpMat Mm(V.n_dofs(), V.n_dofs());
  Mm.setFromTriplets(trip.begin(), trip.end());
  return Mm;
}

// Rows/columns of a full-DOF matrix restricted to the free DOFs.
inline SpMat restrict_to_free(const SpMat& A, const TensorFemSpace& rows, const TensorFemSpace& cols) {
  std::vector<Triplet> trip;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      int i = rows.free_index(int(it.row())), j = cols.free_index(int(it.col()));
      if (i >= 0 && j >= 0) trip.emplace_back(i, j, it.value());
    }
  SpMat R(rows.n_free(), cols.n_free());
  R.setFromTriplets(trip.begin(), trip.end());
  return R;
}

}  // namespace nullctl
