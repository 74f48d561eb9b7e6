#pragma once

// Arrow-Hurwicz iteration and a direct KKT oracle for SaddleSystem.

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nullctl/forms.hpp"
#include "nullctl/linalg.hpp"

namespace nullctl {

enum class Preconditioner {
  none,       // the plain iteration
  augmented,  // primal step through (A + gamma B^T Q^{-1} B)^{-1}, dual step scaled by Q^{-1}
};

struct AHParams {
  double r = 0.01;
  double s = 0.1;
  double tol = 1e-5;
  int max_iter = 500;
  Preconditioner precond = Preconditioner::none;
  double gamma = 0.0;  // augmentation weight, used with Preconditioner::augmented

  void validate() const {
    if (!(r > 0) || !(s > 0) || !(tol > 0) || max_iter < 1)
      throw std::invalid_argument("arrow_hurwicz: r, s, tol must be positive and max_iter >= 1");
    if (gamma < 0) throw std::invalid_argument("arrow_hurwicz: gamma must be nonnegative");
  }
};

struct IterationRecord {
  int k;
  double rel_err1, rel_err2;
};

struct IterationLog {
  std::vector<IterationRecord> records;
  bool converged = false;
  double primal_residual = 0;      // |Ax + B^T lambda - L|
  double constraint_residual = 0;  // |Bx|
  bool least_squares = false;      // direct solve fell back to minimum-norm least squares
  bool inexact = false;            // direct solve accepted a residual above residual_tol
};

struct SaddleSolution {
  VectorXd x, lambda;
  IterationLog log;
};

class SolverDiverged : public std::runtime_error {
 public:
  SolverDiverged(int iteration, const std::string& what)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

// Removes the weighted mean of every gauge group.
inline void project_gauges(VectorXd& v, const std::vector<GaugeGroup>& groups) {
  for (const auto& g : groups) {
    double num = 0, den = 0;
    for (size_t i = 0; i < g.index.size(); ++i) {
      num += g.weight[i] * v[g.index[i]];
      den += g.weight[i];
    }
    double mean = num / den;
    for (int i : g.index) v[i] -= mean;
  }
}

inline double mass_norm(const SpMat& M, const VectorXd& v) { return std::sqrt(std::max(0.0, v.dot(M * v))); }

// |a - b| / |a| in the mass norm, absolute when |a| is below 1e-14.
inline double relative_change(const SpMat& M, const VectorXd& next, const VectorXd& prev) {
  double d = mass_norm(M, next - prev), n = mass_norm(M, next);
  return n < 1e-14 ? d : d / n;
}

inline void finalize_residuals(const SaddleSystem& S, SaddleSolution& sol) {
  sol.log.primal_residual = (S.A * sol.x + S.B.transpose() * sol.lambda - S.L).norm();
  sol.log.constraint_residual = (S.B * sol.x).norm();
}

namespace detail {

inline std::vector<int> first_of_groups(const std::vector<GaugeGroup>& g, int offset = 0) {
  std::vector<int> out;
  for (const auto& grp : g) out.push_back(grp.index.front() + offset);
  return out;
}

inline VectorXd multiplier_mass_diagonal(const SaddleSystem& S) {
  VectorXd d = S.multiplier_mass.diagonal();
  for (int i = 0; i < d.size(); ++i)
    if (!(d[i] > 0)) throw std::runtime_error("arrow_hurwicz: nonpositive multiplier mass diagonal");
  return d;
}

}  // namespace detail

inline SaddleSolution arrow_hurwicz(const SaddleSystem& S, const AHParams& P) {
  P.validate();
  const int n = S.n_primal(), m = S.n_multiplier();
  SaddleSolution sol;
  sol.x = VectorXd::Zero(n);
  sol.lambda = VectorXd::Zero(m);

  SparseLUSolver fact;
  VectorXd qinv;
  std::vector<int> pinned;
  bool pre = P.precond == Preconditioner::augmented;
  if (pre) {
    qinv = detail::multiplier_mass_diagonal(S).cwiseInverse();
    SpMat Ag = S.A;
    if (P.gamma > 0) Ag += SpMat(P.gamma * S.B.transpose() * qinv.asDiagonal() * S.B);
    pinned = detail::first_of_groups(S.primal_gauges);
    if (!fact.compute(pin_rows(Ag, pinned))) throw std::runtime_error("arrow_hurwicz: preconditioner factorization failed");
  }

  VectorXd x = sol.x, lam = sol.lambda;
  for (int k = 1; k <= P.max_iter; ++k) {
    VectorXd g = S.A * x - S.L + S.B.transpose() * lam;
    if (pre) {
      if (P.gamma > 0) g += P.gamma * (S.B.transpose() * (qinv.asDiagonal() * (S.B * x)));
      for (int i : pinned) g[i] = 0.0;
      g = fact.solve(g);
    }
    VectorXd xn = x - P.r * g;
    project_gauges(xn, S.primal_gauges);
    VectorXd c = S.B * xn;
    if (pre) c = qinv.asDiagonal() * c;
    VectorXd ln = lam + P.r * P.s * c;
    project_gauges(ln, S.multiplier_gauges);
    if (!xn.allFinite() || !ln.allFinite()) throw SolverDiverged(k, "arrow_hurwicz: non-finite iterate");
    double e1 = relative_change(S.primal_mass, xn, x);
    double e2 = relative_change(S.multiplier_mass, ln, lam);
    sol.log.records.push_back({k, e1, e2});
    x.swap(xn);
    lam.swap(ln);
    if (e1 < P.tol && e2 < P.tol) {
      sol.log.converged = true;
      break;
    }
  }
  sol.x = x;
  sol.lambda = lam;
  finalize_residuals(S, sol);
  return sol;
}

struct DirectOptions {
  long max_dimension = 400000;
  long max_dense_dimension = 3000;  // least-squares fallback limit
  double residual_tol = 1e-8;       // |Ku - rhs| relative to |rhs|
  double regularization = 1e-12;    // proximal shift relative to max|B| / max mass diagonal
  int refinement_steps = 100;
  int stagnation_window = 8;  // refinement stops when the residual fails to drop 1% over this many steps
  double accept_tol = 1e-4;  // best refined residual still accepted (flagged inexact)
};

namespace detail {

inline void project_gauges_stacked(VectorXd& u, const SaddleSystem& S, int n) {
  VectorXd x = u.head(n), l = u.tail(u.size() - n);
  project_gauges(x, S.primal_gauges);
  project_gauges(l, S.multiplier_gauges);
  u.head(n) = x;
  u.tail(u.size() - n) = l;
}

}  // namespace detail

inline SaddleSolution direct_solve(const SaddleSystem& S, const DirectOptions& opt = {}) {
  const int n = S.n_primal(), m = S.n_multiplier(), N = n + m;
  if (N > opt.max_dimension)
    throw std::length_error("direct_solve: dimension " + std::to_string(N) + " exceeds the guard");
  std::vector<Triplet> trip;
  trip.reserve(S.A.nonZeros() + 2 * S.B.nonZeros());
  for (int k = 0; k < S.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(S.A, k); it; ++it) trip.emplace_back(int(it.row()), int(it.col()), it.value());
  for (int k = 0; k < S.B.outerSize(); ++k)
    for (SpMat::InnerIterator it(S.B, k); it; ++it) {
      trip.emplace_back(n + int(it.row()), int(it.col()), it.value());
      trip.emplace_back(int(it.col()), n + int(it.row()), it.value());
    }
  SpMat K(N, N);
  K.setFromTriplets(trip.begin(), trip.end());
  VectorXd rhs = VectorXd::Zero(N);
  rhs.head(n) = S.L;

  SaddleSolution sol;
  VectorXd u;
  bool ok = false;
  double tol = opt.residual_tol * (rhs.norm() + 1e-300);
  if (S.primal_gauges.empty() && S.multiplier_gauges.empty()) {
    // Plain LU with a few refinement steps.
    SparseLUSolver lu;
    if (lu.compute(K)) {
      u = lu.solve(rhs);
      for (int it = 0; it < 5 && u.allFinite(); ++it) {
        VectorXd res = rhs - K * u;
        if (res.norm() <= tol) {
          ok = true;
          break;
        }
        u += lu.solve(res);
      }
      ok = ok || (u.allFinite() && (K * u - rhs).norm() <= tol);
    }
  }
  if (!ok) {
    // Gauged fields (zero-mean scalars) may carry kernel modes beyond the per-slice constants,
    // and underflowed weights leave A without a positive floor. Solve
    // (K + eps E) u_{k+1} = rhs + eps E u_k with E = diag(+M) on primal rows and diag(-M) on
    // gauged multiplier rows; the fixed point solves K u = rhs.
    VectorXd e = VectorXd::Zero(N);
    for (int i = 0; i < n; ++i) e[i] = S.primal_mass.coeff(i, i);
    for (const auto& g : S.multiplier_gauges)
      for (int i : g.index) e[n + i] = -S.multiplier_mass.coeff(i, i);
    double kmax = 0, emax = e.cwiseAbs().maxCoeff();
    for (int k = 0; k < S.B.outerSize(); ++k)
      for (SpMat::InnerIterator it(S.B, k); it; ++it) kmax = std::max(kmax, std::abs(it.value()));
    double eps = opt.regularization * kmax / emax;
    SpMat Kr = K;
    for (int i = 0; i < N; ++i)
      if (e[i] != 0) Kr.coeffRef(i, i) += eps * e[i];
    SparseLUSolver lu;
    if (lu.compute(Kr)) {
      VectorXd best;
      double best_res = std::numeric_limits<double>::infinity();
      int since_best = 0;
      u = VectorXd::Zero(N);
      for (int it = 0; it < opt.refinement_steps; ++it) {
        VectorXd un = lu.solve(rhs + eps * e.cwiseProduct(u));
        if (!un.allFinite()) break;
        u.swap(un);
        detail::project_gauges_stacked(u, S, n);
        double res = (K * u - rhs).norm();
        if (res < 0.99 * best_res) since_best = 0;
        else ++since_best;
        if (res < best_res) {
          best_res = res;
          best = u;
        }
        if (res <= tol) {
          ok = true;
          break;
        }
        if (since_best >= opt.stagnation_window) break;
      }
      if (!ok && best_res <= opt.accept_tol * (rhs.norm() + 1e-300)) {
        u = best;
        ok = true;
        sol.log.inexact = true;
      }
    }
  }
  if (!ok) {
    if (N > opt.max_dense_dimension)
      throw std::runtime_error("direct_solve: KKT matrix numerically singular and too large for least squares");
    MatrixXd Kd = MatrixXd(K);
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Kd);
    u = cod.solve(rhs);
    sol.log.least_squares = true;
  }
  sol.x = u.head(n);
  sol.lambda = u.tail(m);
  project_gauges(sol.x, S.primal_gauges);
  project_gauges(sol.lambda, S.multiplier_gauges);
  sol.log.converged = true;
  finalize_residuals(S, sol);
  return sol;
}

inline void write_iteration_csv(std::ostream& os, const IterationLog& log) {
  os << "iter,rel_err1,rel_err2\n";
  char buf[96];
  for (const auto& r : log.records) {
    std::snprintf(buf, sizeof buf, "%d,%.6e,%.6e\n", r.k, r.rel_err1, r.rel_err2);
    os << buf;
  }
}

}  // namespace nullctl
