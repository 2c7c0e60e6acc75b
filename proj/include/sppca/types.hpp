#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sppca/error.hpp"

namespace sppca {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Index = Eigen::Index;

/// An n x p sample with per-observation probability weights.
///
/// The weights default to 1/n. Non-uniform weights represent a perturbed
/// empirical distribution, e.g. (1 - eps) F_n + eps delta_x.
struct DataSet {
  MatrixXd X;
  VectorXd obs_weights;
  std::vector<std::string> column_names;

  DataSet() = default;

  explicit DataSet(MatrixXd x, std::vector<std::string> names = {})
      : X(std::move(x)), column_names(std::move(names)) {
    obs_weights = VectorXd::Constant(X.rows(), X.rows() > 0 ? 1.0 / X.rows() : 0.0);
    validate();
  }

  DataSet(MatrixXd x, VectorXd w, std::vector<std::string> names = {})
      : X(std::move(x)), obs_weights(std::move(w)), column_names(std::move(names)) {
    validate();
  }

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }

  void validate() const {
    if (X.rows() < 2 || X.cols() < 1) {
      throw EmptyData("data set needs n >= 2 rows and p >= 1 columns, got " +
                      std::to_string(X.rows()) + "x" + std::to_string(X.cols()));
    }
    if (!X.allFinite()) throw DomainError("data set contains non-finite entries");
    if (obs_weights.size() != X.rows()) {
      throw DimensionMismatch("obs_weights length does not match row count");
    }
    if ((obs_weights.array() < 0.0).any() || !obs_weights.allFinite()) {
      throw DomainError("obs_weights must be finite and nonnegative");
    }
    // Extended precision keeps the check meaningful for large n.
    long double total = 0.0L;
    for (Index i = 0; i < obs_weights.size(); ++i) total += obs_weights[i];
    if (std::abs(static_cast<double>(total - 1.0L)) > 1e-12) {
      throw DomainError("obs_weights must sum to 1");
    }
    if (!column_names.empty() && static_cast<Index>(column_names.size()) != X.cols()) {
      throw DimensionMismatch("column_names length does not match column count");
    }
  }
};

/// Location vector plus scatter matrix. When `diag_approx` is set, distances
/// are computed with diag(V) only, although V itself is kept in full.
struct LocationScatter {
  VectorXd mu;
  MatrixXd V;
  bool diag_approx = false;

  Index p() const { return mu.size(); }

  void validate() const {
    if (V.rows() != mu.size() || V.cols() != mu.size()) {
      throw DimensionMismatch("scatter matrix is not p x p with p = dim(mu)");
    }
    if (!mu.allFinite() || !V.allFinite()) throw DomainError("non-finite location/scatter");
    const double scale = std::max(1.0, V.cwiseAbs().maxCoeff());
    if ((V - V.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw DomainError("scatter matrix is not symmetric");
    }
  }
};

/// Converged SPPCA fit at one initialization scale.
struct FitResult {
  LocationScatter ls;
  double a = 0.0;
  std::vector<bool> active_mask;
  double active_ratio = 0.0;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
  /// Set when the fit failed with an error inside a solution path.
  std::optional<std::string> failure;
};

struct FitOptions {
  double tol = 1e-8;
  int max_iter = 500;
  bool diag_approx = true;
};

}  // namespace sppca
