#pragma once

// Saddle-point systems  [A B^T; B 0] (x, lambda) = (L, 0)  for the heat
// (hatted variables), Stokes and Oseen mixed formulations.

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "nullctl/fem.hpp"
#include "nullctl/weights.hpp"

namespace nullctl {

using ScalarFn = std::function<double(const Vec2&, double)>;
using VectorFn = std::function<Vec2(const Vec2&, double)>;

struct FieldBlock {
  std::string name;
  SpacePtr space;
  int offset = 0;  // position of the first free DOF in the stacked vector
};

// DOFs of one constant-per-time-node mode; weights give the slice integral.
struct GaugeGroup {
  std::vector<int> index;
  std::vector<double> weight;
};

struct SaddleSystem {
  SpMat A, B;
  VectorXd L;
  std::vector<FieldBlock> primal, multiplier;
  std::vector<GaugeGroup> primal_gauges, multiplier_gauges;
  SpMat primal_mass, multiplier_mass;

  int n_primal() const { return static_cast<int>(A.rows()); }
  int n_multiplier() const { return static_cast<int>(B.rows()); }

  const FieldBlock& block(const std::string& name) const {
    for (const auto& b : primal)
      if (b.name == name) return b;
    for (const auto& b : multiplier)
      if (b.name == name) return b;
    throw std::out_of_range("saddle system: no field named " + name);
  }

  // Full-length coefficient vector of a named field from a stacked vector.
  VectorXd field(const VectorXd& stacked, const std::string& name) const {
    const FieldBlock& b = block(name);
    return b.space->expand(stacked.segment(b.offset, b.space->n_free()));
  }
};

struct FormOptions {
  std::optional<QuadratureRule> rule;  // default: exact to 2m+2 / 2n+2 for the highest degrees
  int jobs = 1;
};

namespace detail {

// Basis values of one space on every quadrature point of one prism.
struct CellBasis {
  int nl = 0, nls = 0, nlt = 0;
  std::vector<int> dofs;
  std::vector<double> v, d;  // index q * nl + l, q = jq * nqx + iq
  std::vector<Vec2> g;
};

class Tabulator {
 public:
  Tabulator(const TensorFemSpace& V, const QuadratureRule& q)
      : V_(V), st_(V.tri_basis(), q.tri.x), tt_{TemporalTable(V.time_basis(), q.time.x),
                                                   TemporalTable(V.time_basis(), q.time_final.x)} {}

  void fill(int prism, const TriangleMap& f, bool final_slab, CellBasis& cb) const {
    const auto& M = V_.mesh();
    const TemporalTable& tt = tt_[final_slab];
    cb.nls = V_.n_local_spatial();
    cb.nlt = V_.n_local_temporal();
    cb.nl = cb.nls * cb.nlt;
    V_.cell_dofs(prism, cb.dofs);
    int nqx = st_.nq, nq = nqx * tt.nq;
    cb.v.resize(nq * cb.nl);
    cb.d.resize(nq * cb.nl);
    cb.g.resize(nq * cb.nl);
    std::vector<Vec2> pg(st_.nq * cb.nls);
    for (int i = 0; i < st_.nq * cb.nls; ++i) pg[i] = f.JinvT * st_.rgrad[i];
    for (int jq = 0; jq < tt.nq; ++jq)
      for (int iq = 0; iq < nqx; ++iq) {
        int q = jq * nqx + iq;
        for (int a = 0; a < cb.nlt; ++a) {
          double tv = tt.val[jq * cb.nlt + a], td = tt.der[jq * cb.nlt + a] / M.dt;
          for (int k = 0; k < cb.nls; ++k) {
            int l = a * cb.nls + k;
            double sv = st_.val[iq * cb.nls + k];
            cb.v[q * cb.nl + l] = sv * tv;
            cb.d[q * cb.nl + l] = sv * td;
            cb.g[q * cb.nl + l] = pg[iq * cb.nls + k] * tv;
          }
        }
      }
  }

 private:
  const TensorFemSpace& V_;
  SpatialTable st_;
  TemporalTable tt_[2];
};

// Local-to-global map for a list of blocks; local index = start[b] + c * nl + l.
struct LocalMap {
  std::vector<int> start;
  std::vector<int> global;
  int size = 0;

  void build(const std::vector<FieldBlock>& blocks, const std::vector<CellBasis>& cbs) {
    start.resize(blocks.size());
    size = 0;
    for (size_t b = 0; b < blocks.size(); ++b) {
      start[b] = size;
      size += blocks[b].space->components() * cbs[b].nl;
    }
    global.assign(size, -1);
    for (size_t b = 0; b < blocks.size(); ++b) {
      const auto& V = *blocks[b].space;
      for (int c = 0; c < V.components(); ++c)
        for (int l = 0; l < cbs[b].nl; ++l) {
          int fi = V.free_index(c * V.n_scalar() + cbs[b].dofs[l]);
          global[start[b] + c * cbs[b].nl + l] = fi < 0 ? -1 : blocks[b].offset + fi;
        }
    }
  }
};

inline void scatter(const MatrixXd& loc, const LocalMap& rows, const LocalMap& cols, std::vector<Triplet>& out) {
  for (int j = 0; j < loc.cols(); ++j) {
    int gj = cols.global[j];
    if (gj < 0) continue;
    for (int i = 0; i < loc.rows(); ++i) {
      int gi = rows.global[i];
      if (gi < 0 || loc(i, j) == 0.0) continue;
      out.emplace_back(gi, gj, loc(i, j));
    }
  }
}

// Runs work(begin, end, tripletsA, tripletsB) over contiguous prism ranges and
// concatenates the triplets in prism order, so the result does not depend on jobs.
template <class Work>
void parallel_cells(int n_cells, int jobs, std::vector<Triplet>& A, std::vector<Triplet>& B, Work&& work) {
  jobs = std::max(1, std::min(jobs, n_cells));
  std::vector<std::vector<Triplet>> ta(jobs), tb(jobs);
  auto range = [&](int j) { return std::pair<int, int>{int(long(n_cells) * j / jobs), int(long(n_cells) * (j + 1) / jobs)}; };
  if (jobs == 1) {
    work(0, n_cells, ta[0], tb[0]);
  } else {
    std::vector<std::thread> th;
    std::vector<std::exception_ptr> err(jobs);
    for (int j = 0; j < jobs; ++j)
      th.emplace_back([&, j] {
        try {
          auto [b, e] = range(j);
          work(b, e, ta[j], tb[j]);
        } catch (...) {
          err[j] = std::current_exception();
        }
      });
    for (auto& t : th) t.join();
    for (auto& e : err)
      if (e) std::rethrow_exception(e);
  }
  for (int j = 0; j < jobs; ++j) {
    A.insert(A.end(), ta[j].begin(), ta[j].end());
    B.insert(B.end(), tb[j].begin(), tb[j].end());
  }
}

inline void layout(std::vector<FieldBlock>& blocks) {
  int off = 0;
  for (auto& b : blocks) {
    b.offset = off;
    off += b.space->n_free();
  }
}

inline int total_free(const std::vector<FieldBlock>& blocks) {
  int n = 0;
  for (const auto& b : blocks) n += b.space->n_free();
  return n;
}

inline SpMat block_mass(const std::vector<FieldBlock>& blocks) {
  int n = total_free(blocks);
  std::vector<Triplet> trip;
  for (const auto& b : blocks) {
    SpMat m = restrict_to_free(mass_matrix(*b.space), *b.space, *b.space);
    for (int k = 0; k < m.outerSize(); ++k)
      for (SpMat::InnerIterator it(m, k); it; ++it)
        trip.emplace_back(b.offset + int(it.row()), b.offset + int(it.col()), it.value());
  }
  SpMat M(n, n);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

inline std::vector<GaugeGroup> gauges(const std::vector<FieldBlock>& blocks) {
  std::vector<GaugeGroup> out;
  for (const auto& b : blocks) {
    const auto& V = *b.space;
    if (V.constraint() != Constraint::zero_mean_slice) continue;
    for (int c = 0; c < V.components(); ++c)
      for (int k = 0; k < V.n_temporal(); ++k) {
        GaugeGroup g;
        for (int s = 0; s < V.n_spatial(); ++s) {
          g.index.push_back(b.offset + V.free_index(V.dof(c, k, s)));
          g.weight.push_back(V.slice_weights()[s]);
        }
        out.push_back(std::move(g));
      }
  }
  return out;
}

inline QuadratureRule rule_for(const std::vector<SpacePtr>& spaces, const FormOptions& opt) {
  if (opt.rule) return *opt.rule;
  int m = 1, n = 1;
  for (const auto& s : spaces) m = std::max(m, s->m()), n = std::max(n, s->n());
  return make_quadrature(2 * m + 2, 2 * n + 2);
}

inline void check_space(const SpacePtr& s, const std::shared_ptr<const SpaceTimeMesh>& mesh, int comps,
                        Constraint c, const char* name) {
  if (!s) throw std::invalid_argument(std::string("forms: missing space ") + name);
  if (s->mesh_ptr() != mesh) throw std::invalid_argument(std::string("forms: mismatched mesh for ") + name);
  if (s->components() != comps)
    throw std::invalid_argument(std::string("forms: wrong component count for ") + name);
  if (s->constraint() != c) throw std::invalid_argument(std::string("forms: wrong constraint for ") + name);
}

// Load on the p-block: int_Omega f(x) . p(x,0) dx, with f returning one value per component.
inline VectorXd initial_load(const FieldBlock& pb, int n_primal, const QuadratureRule& q,
                             const std::function<void(const Vec2&, double*)>& f) {
  const TensorFemSpace& V = *pb.space;
  const auto& M = V.mesh();
  VectorXd L = VectorXd::Zero(n_primal);
  SpatialTable st(V.tri_basis(), q.tri.x);
  int nls = V.n_local_spatial();
  std::vector<int> nodes(nls);
  double val[2];
  for (int t = 0; t < M.num_triangles(); ++t) {
    TriangleMap fm = triangle_map(M, t);
    V.spatial_nodes(t, nodes.data());
    for (int iq = 0; iq < st.nq; ++iq) {
      Vec2 x = fm(q.tri.x[iq]);
      f(x, val);
      double w = fm.det * q.tri.w[iq];
      for (int c = 0; c < V.components(); ++c)
        for (int k = 0; k < nls; ++k) {
          int fi = V.free_index(V.dof(c, 0, nodes[k]));
          if (fi >= 0) L[pb.offset + fi] += w * val[c] * st.val[iq * nls + k];
        }
    }
  }
  return L;
}

inline void finish(SaddleSystem& S, std::vector<Triplet>& ta, std::vector<Triplet>& tb) {
  int np = total_free(S.primal), nm = total_free(S.multiplier);
  S.A.resize(np, np);
  S.A.setFromTriplets(ta.begin(), ta.end());
  S.B.resize(nm, np);
  S.B.setFromTriplets(tb.begin(), tb.end());
  S.primal_mass = block_mass(S.primal);
  S.multiplier_mass = block_mass(S.multiplier);
  S.primal_gauges = gauges(S.primal);
  S.multiplier_gauges = gauges(S.multiplier);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Heat, hatted variables (z_hat, p_hat | lambda_hat)

struct HeatSpaces {
  SpacePtr z, p, lambda;
};

inline HeatSpaces make_heat_spaces(std::shared_ptr<const SpaceTimeMesh> mesh, int m = 2, int n = 2) {
  return {build_space(mesh, m, n, 1, Constraint::none), build_space(mesh, m, n, 1, Constraint::zero_lateral),
          build_space(mesh, m, n, 1, Constraint::zero_lateral_final)};
}

inline SaddleSystem assemble_heat(const HeatSpaces& sp, const WeightSet& ws, const ScalarFn& G,
                                  const std::function<double(const Vec2&)>& y0, const FormOptions& opt = {}) {
  if (!sp.z) throw std::invalid_argument("forms: missing space z_hat");
  auto mesh = sp.z->mesh_ptr();
  detail::check_space(sp.z, mesh, 1, Constraint::none, "z_hat");
  detail::check_space(sp.p, mesh, 1, Constraint::zero_lateral, "p_hat");
  detail::check_space(sp.lambda, mesh, 1, Constraint::zero_lateral_final, "lambda_hat");
  const SpaceTimeMesh& M = *mesh;
  if (std::abs(M.T - ws.T()) > 1e-14 * M.T || std::abs(M.L1 - ws.L1()) > 1e-14 * M.L1 ||
      std::abs(M.L2 - ws.L2()) > 1e-14 * M.L2)
    throw std::invalid_argument("forms: weight set and mesh disagree on the domain");
  QuadratureRule q = detail::rule_for({sp.z, sp.p, sp.lambda}, opt);

  SaddleSystem S;
  S.primal = {{"z_hat", sp.z, 0}, {"p_hat", sp.p, 0}};
  S.multiplier = {{"lambda_hat", sp.lambda, 0}};
  detail::layout(S.primal);
  detail::layout(S.multiplier);

  detail::Tabulator tz(*sp.z, q), tp(*sp.p, q), tl(*sp.lambda, q);
  std::vector<Triplet> ta, tb;
  detail::parallel_cells(M.num_prisms(), opt.jobs, ta, tb,
                         [&](int p0, int p1, std::vector<Triplet>& oa, std::vector<Triplet>& ob) {
    std::vector<detail::CellBasis> cp(2), cm(1);
    detail::LocalMap rp, rm;
    MatrixXd Al, Bl;
    std::vector<ChiValues> chis(q.tri.x.size());
    std::vector<Vec2> xs(q.tri.x.size());
    for (int pr = p0; pr < p1; ++pr) {
      const Prism& P = M.prisms[pr];
      bool fin = P.slab == M.nt - 1;
      const Rule1D& rt = q.time_rule(fin);
      TriangleMap fm = triangle_map(M, P.triangle);
      tz.fill(pr, fm, fin, cp[0]);
      tp.fill(pr, fm, fin, cp[1]);
      tl.fill(pr, fm, fin, cm[0]);
      rp.build(S.primal, cp);
      rm.build(S.multiplier, cm);
      Al.setZero(rp.size, rp.size);
      Bl.setZero(rm.size, rp.size);
      bool in_omega = M.omega_flag[P.triangle];
      int nqx = int(q.tri.x.size());
      for (int iq = 0; iq < nqx; ++iq) {
        xs[iq] = fm(q.tri.x[iq]);
        chis[iq] = ws.chi(xs[iq]);
      }
      const auto &bz = cp[0], &bp = cp[1], &bl = cm[0];
      int oz = rp.start[0], op = rp.start[1];
      for (size_t jq = 0; jq < rt.x.size(); ++jq) {
        double t = M.time_nodes[P.slab] + rt.x[jq] * M.dt;
        for (int iq = 0; iq < nqx; ++iq) {
          int qq = int(jq) * nqx + iq;
          double w = fm.det * q.tri.w[iq] * M.dt * rt.w[jq];
          HattedCoeffs h = hatted_coeffs(chis[iq], M.T - t);
          double g = G ? G(xs[iq], t) : 0.0;
          const double* vz = &bz.v[qq * bz.nl];
          const double* vp = &bp.v[qq * bp.nl];
          const double* dp = &bp.d[qq * bp.nl];
          const Vec2* gp = &bp.g[qq * bp.nl];
          const double* vl = &bl.v[qq * bl.nl];
          const Vec2* gl = &bl.g[qq * bl.nl];
          for (int i = 0; i < bz.nl; ++i)
            for (int j = 0; j < bz.nl; ++j) Al(oz + i, oz + j) += w * vz[i] * vz[j];
          if (in_omega)
            for (int i = 0; i < bp.nl; ++i)
              for (int j = 0; j < bp.nl; ++j) Al(op + i, op + j) += w * vp[i] * vp[j];
          for (int i = 0; i < bl.nl; ++i) {
            double li = w * vl[i];
            for (int j = 0; j < bz.nl; ++j) Bl(i, oz + j) += li * vz[j];
            for (int j = 0; j < bp.nl; ++j) {
              double val = h.c_time * (dp[j] * vl[i] - gp[j].dot(gl[i]) - g * vp[j] * vl[i]) +
                           h.c_grad.dot(gp[j]) * vl[i] + h.c_mass * vp[j] * vl[i];
              Bl(i, op + j) += w * val;
            }
          }
        }
      }
      detail::scatter(Al, rp, rp, oa);
      detail::scatter(Bl, rm, rp, ob);
    }
  });
  detail::finish(S, ta, tb);
  S.L = detail::initial_load(S.primal[1], S.n_primal(), q, [&](const Vec2& x, double* v) {
    double y = y0 ? y0(x) : 0.0;
    v[0] = y == 0.0 ? 0.0 : ws.rho0_initial(ws.chi(x).chi) * y;
  });
  return S;
}

// ---------------------------------------------------------------------------
// Stokes / Oseen (z, p, sigma | lambda, mu)

struct FlowSpaces {
  SpacePtr z, p, sigma, lambda, mu;
};

inline FlowSpaces make_flow_spaces(std::shared_ptr<const SpaceTimeMesh> mesh, int m = 2, int n = 2) {
  return {build_space(mesh, m, n, 2, Constraint::none), build_space(mesh, m, n, 2, Constraint::zero_lateral),
          build_space(mesh, m, n, 1, Constraint::zero_mean_slice), build_space(mesh, m, n, 2, Constraint::zero_lateral),
          build_space(mesh, m, n, 1, Constraint::zero_mean_slice)};
}

// Transport terms of the Oseen adjoint: ybar is the trajectory, w the transported field.
struct OseenData {
  VectorFn ybar;
  VectorFn w;
};

inline SaddleSystem assemble_flow(const FlowSpaces& sp, const WeightSet& ws, double nu,
                                  const std::function<Vec2(const Vec2&)>& y0, const OseenData* oseen,
                                  const FormOptions& opt = {}) {
  if (!(nu > 0)) throw std::invalid_argument("forms: viscosity must be positive");
  if (!sp.z) throw std::invalid_argument("forms: missing space z");
  auto mesh = sp.z->mesh_ptr();
  detail::check_space(sp.z, mesh, 2, Constraint::none, "z");
  detail::check_space(sp.p, mesh, 2, Constraint::zero_lateral, "p");
  detail::check_space(sp.sigma, mesh, 1, Constraint::zero_mean_slice, "sigma");
  detail::check_space(sp.lambda, mesh, 2, Constraint::zero_lateral, "lambda");
  detail::check_space(sp.mu, mesh, 1, Constraint::zero_mean_slice, "mu");
  const SpaceTimeMesh& M = *mesh;
  if (std::abs(M.T - ws.T()) > 1e-14 * M.T) throw std::invalid_argument("forms: weight set and mesh disagree on T");
  QuadratureRule q = detail::rule_for({sp.z, sp.p, sp.sigma, sp.lambda, sp.mu}, opt);

  SaddleSystem S;
  S.primal = {{"z", sp.z, 0}, {"p", sp.p, 0}, {"sigma", sp.sigma, 0}};
  S.multiplier = {{"lambda", sp.lambda, 0}, {"mu", sp.mu, 0}};
  detail::layout(S.primal);
  detail::layout(S.multiplier);

  detail::Tabulator tz(*sp.z, q), tp(*sp.p, q), ts(*sp.sigma, q), tl(*sp.lambda, q), tm(*sp.mu, q);
  std::vector<Triplet> ta, tb;
  detail::parallel_cells(M.num_prisms(), opt.jobs, ta, tb,
                         [&](int p0, int p1, std::vector<Triplet>& oa, std::vector<Triplet>& ob) {
    std::vector<detail::CellBasis> cp(3), cm(2);
    detail::LocalMap rp, rm;
    MatrixXd Al, Bl;
    std::vector<double> chis(q.tri.x.size());
    std::vector<Vec2> xs(q.tri.x.size());
    for (int pr = p0; pr < p1; ++pr) {
      const Prism& P = M.prisms[pr];
      bool fin = P.slab == M.nt - 1;
      const Rule1D& rt = q.time_rule(fin);
      TriangleMap fm = triangle_map(M, P.triangle);
      tz.fill(pr, fm, fin, cp[0]);
      tp.fill(pr, fm, fin, cp[1]);
      ts.fill(pr, fm, fin, cp[2]);
      tl.fill(pr, fm, fin, cm[0]);
      tm.fill(pr, fm, fin, cm[1]);
      rp.build(S.primal, cp);
      rm.build(S.multiplier, cm);
      Al.setZero(rp.size, rp.size);
      Bl.setZero(rm.size, rp.size);
      bool in_omega = M.omega_flag[P.triangle];
      int nqx = int(q.tri.x.size());
      for (int iq = 0; iq < nqx; ++iq) {
        xs[iq] = fm(q.tri.x[iq]);
        chis[iq] = ws.chi(xs[iq]).chi;
      }
      const auto &bz = cp[0], &bp = cp[1], &bs = cp[2], &bl = cm[0], &bm = cm[1];
      int oz = rp.start[0], op = rp.start[1], os = rp.start[2];
      int ol = rm.start[0], om = rm.start[1];
      for (size_t jq = 0; jq < rt.x.size(); ++jq) {
        double t = M.time_nodes[P.slab] + rt.x[jq] * M.dt;
        for (int iq = 0; iq < nqx; ++iq) {
          int qq = int(jq) * nqx + iq;
          double w = fm.det * q.tri.w[iq] * M.dt * rt.w[jq];
          double r = ws.inv_weight(Weight::base, chis[iq], t);
          double r0 = ws.inv_weight(Weight::rho0, chis[iq], t);
          double az = w * r * r, ap = in_omega ? w * r0 * r0 : 0.0;
          Vec2 adv = Vec2::Zero(), yb = Vec2::Zero();
          if (oseen) {
            if (oseen->ybar) yb = oseen->ybar(xs[iq], t);
            adv = yb;
            if (oseen->w) adv += oseen->w(xs[iq], t);
          }
          const double* vz = &bz.v[qq * bz.nl];
          const double* vp = &bp.v[qq * bp.nl];
          const double* dp = &bp.d[qq * bp.nl];
          const Vec2* gp = &bp.g[qq * bp.nl];
          const Vec2* gs = &bs.g[qq * bs.nl];
          const double* vl = &bl.v[qq * bl.nl];
          const Vec2* gl = &bl.g[qq * bl.nl];
          const double* vm = &bm.v[qq * bm.nl];
          int nz = bz.nl, np = bp.nl, ns = bs.nl, nl = bl.nl, nm = bm.nl;
          for (int c = 0; c < 2; ++c) {
            if (az != 0.0)
              for (int i = 0; i < nz; ++i)
                for (int j = 0; j < nz; ++j) Al(oz + c * nz + i, oz + c * nz + j) += az * vz[i] * vz[j];
            if (ap != 0.0)
              for (int i = 0; i < np; ++i)
                for (int j = 0; j < np; ++j) Al(op + c * np + i, op + c * np + j) += ap * vp[i] * vp[j];
          }
          for (int i = 0; i < nl; ++i) {
            double li = w * vl[i];
            for (int c = 0; c < 2; ++c) {
              int row = ol + c * nl + i;
              for (int j = 0; j < nz; ++j) Bl(row, oz + c * nz + j) += li * vz[j];
              for (int j = 0; j < np; ++j) {
                double val = li * (dp[j] + adv.dot(gp[j])) - w * nu * gp[j].dot(gl[i]);
                Bl(row, op + c * np + j) += val;
                // ((grad p)^T ybar)_c = sum_d d_c p_d ybar_d
                if (oseen)
                  for (int d = 0; d < 2; ++d) Bl(row, op + d * np + j) += li * gp[j][c] * yb[d];
              }
              for (int j = 0; j < ns; ++j) Bl(row, os + j) -= li * gs[j][c];
            }
          }
          for (int i = 0; i < nm; ++i) {
            double mi = w * vm[i];
            for (int c = 0; c < 2; ++c)
              for (int j = 0; j < np; ++j) Bl(om + i, op + c * np + j) += mi * gp[j][c];
          }
        }
      }
      detail::scatter(Al, rp, rp, oa);
      detail::scatter(Bl, rm, rp, ob);
    }
  });
  detail::finish(S, ta, tb);
  S.L = detail::initial_load(S.primal[1], S.n_primal(), q, [&](const Vec2& x, double* v) {
    Vec2 y = y0 ? y0(x) : Vec2::Zero();
    v[0] = y.x();
    v[1] = y.y();
  });
  return S;
}

inline SaddleSystem assemble_stokes(const FlowSpaces& sp, const WeightSet& ws, double nu,
                                    const std::function<Vec2(const Vec2&)>& y0, const FormOptions& opt = {}) {
  return assemble_flow(sp, ws, nu, y0, nullptr, opt);
}

inline SaddleSystem assemble_oseen(const FlowSpaces& sp, const WeightSet& ws, double nu, const VectorFn& ybar,
                                   const VectorFn& w, const std::function<Vec2(const Vec2&)>& u0,
                                   const FormOptions& opt = {}) {
  OseenData od{ybar, w};
  return assemble_flow(sp, ws, nu, u0, &od, opt);
}

// Matrix-market style dump of one sparse matrix or vector.
inline void write_matrix_market(std::ostream& os, const SpMat& A) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
  os.precision(17);
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) os << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
}

inline void write_matrix_market(std::ostream& os, const VectorXd& v) {
  os << "%%MatrixMarket matrix array real general\n";
  os << v.size() << " 1\n";
  os.precision(17);
  for (int i = 0; i < v.size(); ++i) os << v[i] << "\n";
}

}  // namespace nullctl
