#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sppca/error.hpp"
#include "sppca/types.hpp"

namespace sppca {

struct PCAModel {
  VectorXd eigenvalues;   // descending
  MatrixXd eigenvectors;  // p x k, orthonormal columns
  Index k = 0;
};

/// Flips each column so its largest-magnitude entry is positive.
inline void normalize_signs(MatrixXd& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    Index arg = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, j) < 0.0) vectors.col(j) *= -1.0;
  }
}

/// Top-k eigenpairs of a symmetric matrix, descending, sign-normalized.
inline PCAModel pca(const MatrixXd& V, Index k) {
  const Index p = V.rows();
  if (V.cols() != p) throw DimensionMismatch("pca needs a square matrix");
  if (k < 1 || k > p) {
    throw DomainError("rank k must satisfy 1 <= k <= p, got " + std::to_string(k));
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(V);
  if (es.info() != Eigen::Success) throw DomainError("eigendecomposition failed");
  // Eigen returns ascending order.
  PCAModel m;
  m.k = k;
  m.eigenvalues = es.eigenvalues().reverse().head(k);
  m.eigenvectors = es.eigenvectors().rowwise().reverse().leftCols(k);
  normalize_signs(m.eigenvectors);
  return m;
}

inline PCAModel pca(const LocationScatter& ls, Index k) { return pca(ls.V, k); }

}  // namespace sppca
