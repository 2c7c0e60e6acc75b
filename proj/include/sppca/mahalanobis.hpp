#pragma once

#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "sppca/error.hpp"
#include "sppca/types.hpp"

namespace sppca {

// Squared pivot ratio of the Cholesky factor below which V is treated as singular.
inline constexpr double kSingularPivotRatio = 1e-13;

/// Factorization of a scatter matrix for repeated distance evaluation.
/// Uses a Cholesky solve for the full metric and diag(V) when the diagonal
/// approximation is active; never forms V^{-1}.
class ScatterMetric {
 public:
  explicit ScatterMetric(const LocationScatter& ls) : mu_(ls.mu), diag_(ls.diag_approx) {
    const Index p = ls.mu.size();
    if (ls.V.rows() != p || ls.V.cols() != p) {
      throw DimensionMismatch("scatter matrix dimension does not match location");
    }
    if (diag_) {
      const VectorXd d = ls.V.diagonal();
      if (!(d.array() > 0.0).all() || !d.allFinite()) {
        throw SingularScatter("diagonal of scatter matrix has nonpositive entries");
      }
      inv_diag_ = d.cwiseInverse();
      return;
    }
    llt_.compute(ls.V);
    if (llt_.info() != Eigen::Success) {
      throw SingularScatter("scatter matrix is not positive definite");
    }
    const VectorXd piv = MatrixXd(llt_.matrixL()).diagonal();
    const double lo = piv.minCoeff();
    const double hi = piv.maxCoeff();
    if (!(lo > 0.0) || (lo * lo) / (hi * hi) < kSingularPivotRatio) {
      throw SingularScatter("scatter matrix is numerically singular (pivot ratio " +
                            std::to_string(lo / hi) + ")");
    }
  }

  Index p() const { return mu_.size(); }

  double operator()(const Eigen::Ref<const VectorXd>& x) const {
    if (x.size() != mu_.size()) throw DimensionMismatch("point dimension does not match location");
    const VectorXd z = x - mu_;
    if (diag_) return z.cwiseAbs2().dot(inv_diag_);
    return llt_.matrixL().solve(z).squaredNorm();
  }

  /// Distances of every row of X.
  VectorXd rows(const MatrixXd& X) const {
    if (X.cols() != mu_.size()) throw DimensionMismatch("data dimension does not match location");
    MatrixXd Z = X.rowwise() - mu_.transpose();
    if (diag_) return Z.cwiseAbs2() * inv_diag_;
    MatrixXd Zt = Z.transpose();
    llt_.matrixL().solveInPlace(Zt);
    return Zt.colwise().squaredNorm().transpose();
  }

 private:
  VectorXd mu_;
  bool diag_;
  VectorXd inv_diag_;
  Eigen::LLT<MatrixXd> llt_;
};

/// (x - mu)' V^{-1} (x - mu), or the diagonal form when ls.diag_approx is set.
inline double mahalanobis(const Eigen::Ref<const VectorXd>& x, const LocationScatter& ls) {
  return ScatterMetric(ls)(x);
}

}  // namespace sppca
