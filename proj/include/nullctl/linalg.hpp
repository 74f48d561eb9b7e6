#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>
#ifdef NULLCTL_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#else
#include <Eigen/SparseLU>
#endif

namespace nullctl {

// Sparse LU for general square systems.
class SparseLUSolver {
 public:
  SparseLUSolver() {
#ifdef NULLCTL_HAVE_UMFPACK
    // Space-time systems behave like 3D meshes; nested dissection keeps the fill down.
    lu_.umfpackControl()(UMFPACK_ORDERING) = UMFPACK_ORDERING_METIS;
#endif
  }

  bool compute(const Eigen::SparseMatrix<double>& K) {
    K_ = K;
    K_.makeCompressed();
    lu_.analyzePattern(K_);
    analyzed_ = true;
    lu_.factorize(K_);
    return lu_.info() == Eigen::Success;
  }
  // Numeric refactorization of a matrix with the sparsity pattern of the last compute().
  bool refactor(const Eigen::SparseMatrix<double>& K) {
    if (!analyzed_ || K.nonZeros() != K_.nonZeros() || K.rows() != K_.rows()) return compute(K);
    K_ = K;
    K_.makeCompressed();
    lu_.factorize(K_);
    return lu_.info() == Eigen::Success;
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = lu_.solve(b);
    return x;
  }

 private:
  Eigen::SparseMatrix<double> K_;  // the UMFPACK wrapper refers to the factored matrix
  bool analyzed_ = false;
#ifdef NULLCTL_HAVE_UMFPACK
  Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu_;
#else
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
#endif
};

// Replaces the given rows and columns by identity rows/columns.
inline Eigen::SparseMatrix<double> pin_rows(const Eigen::SparseMatrix<double>& K, const std::vector<int>& pinned) {
  std::vector<char> mask(K.rows(), 0);
  for (int i : pinned) mask[i] = 1;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(K.nonZeros() + pinned.size());
  for (int k = 0; k < K.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(K, k); it; ++it)
      if (!mask[it.row()] && !mask[it.col()]) trip.emplace_back(int(it.row()), int(it.col()), it.value());
  for (int i : pinned) trip.emplace_back(i, i, 1.0);
  Eigen::SparseMatrix<double> P(K.rows(), K.cols());
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

}  // namespace nullctl
