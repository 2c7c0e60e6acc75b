#pragma once

// Finite-perturbation influence functions: refit the unit-determinant
// functional on (1 - eps) F_n + eps delta_x and difference against F_n.

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "sppca/error.hpp"
#include "sppca/estimator.hpp"
#include "sppca/pca.hpp"
#include "sppca/robust_scale.hpp"
#include "sppca/types.hpp"
#include "sppca/weights.hpp"

namespace sppca {

struct Functional {
  enum class Kind { Location, Eigenvector, EigenRatio };
  Kind kind = Kind::Location;
  Index i = 0;  // EigenRatio: lambda_j / lambda_i
  Index j = 0;

  static Functional location() { return {Kind::Location, 0, 0}; }
  static Functional eigenvector(Index j) { return {Kind::Eigenvector, 0, j}; }
  static Functional eigen_ratio(Index i, Index j) { return {Kind::EigenRatio, i, j}; }
};

/// Every functional value at one distribution.
struct FunctionalValues {
  VectorXd mu;
  VectorXd eigenvalues;   // descending, |V| = 1
  MatrixXd eigenvectors;  // columns aligned in sign with the base fit

  VectorXd get(const Functional& f) const {
    switch (f.kind) {
      case Functional::Kind::Location:
        return mu;
      case Functional::Kind::Eigenvector:
        return eigenvectors.col(f.j);
      case Functional::Kind::EigenRatio:
        return VectorXd::Constant(1, eigenvalues[f.j] / eigenvalues[f.i]);
    }
    return {};
  }
};

struct EmpiricalIF {
  VectorXd value;       // difference quotient at eps
  VectorXd value_half;  // difference quotient at eps / 2
  /// |value - value_half| / max(|value|, |value_half|); small in the first-order regime.
  double discrepancy = 0.0;
};

/// Options for the refits; tolerances are tight because the difference
/// quotient divides by eps.
struct InfluenceOptions {
  double tol = 1e-12;
  int max_iter = 5000;
  /// Distances with diag(V) instead of the full metric.
  bool diag_approx = false;
};

class EmpiricalInfluence {
 public:
  EmpiricalInfluence(DataSet reference, WeightSpec spec, InfluenceOptions opts = {},
                     std::optional<LocationScatter> init = std::nullopt)
      : ref_(std::move(reference)), spec_(spec), opts_(opts) {
    ref_.validate();
    spec_.validate();
    const double n = static_cast<double>(ref_.n());
    if ((ref_.obs_weights.array() - 1.0 / n).abs().maxCoeff() > 1e-12) {
      throw DomainError("reference data set must carry uniform weights");
    }
    LocationScatter start = init ? *init : initial_estimate(ref_);
    start.V /= std::exp(detail::log_det_spd(start.V) / static_cast<double>(ref_.p()));
    const FitResult fit = fit_unit_determinant(ref_, start, spec_, fit_options());
    require_converged(fit, "base fit");
    base_ls_ = fit.ls;
    base_ = extract(base_ls_, nullptr);
  }

  const FunctionalValues& base() const { return base_; }
  const LocationScatter& base_fit() const { return base_ls_; }

  /// Functional values at (1 - eps) F_n + eps delta_x, warm-started at the base fit.
  FunctionalValues perturbed(const VectorXd& x, double eps) const {
    if (!(eps > 0.0 && eps <= 0.01)) throw DomainError("eps must lie in (0, 0.01]");
    if (x.size() != ref_.p()) throw DimensionMismatch("probe dimension does not match reference");
    const Index n = ref_.n();
    MatrixXd X(n + 1, ref_.p());
    X.topRows(n) = ref_.X;
    X.row(n) = x.transpose();
    VectorXd w = VectorXd::Constant(n + 1, (1.0 - eps) / static_cast<double>(n));
    w[n] = eps;
    const DataSet mixed(std::move(X), std::move(w));
    const FitResult fit = fit_unit_determinant(mixed, base_ls_, spec_, fit_options());
    require_converged(fit, "perturbed fit at eps = " + std::to_string(eps));
    return extract(fit.ls, &base_);
  }

  /// Difference quotients at eps and eps / 2 for every functional at once.
  struct All {
    FunctionalValues at_eps;
    FunctionalValues at_half;
    double eps = 0.0;
  };

  All perturb_both(const VectorXd& x, double eps = 1e-3) const {
    return {perturbed(x, eps), perturbed(x, 0.5 * eps), eps};
  }

  EmpiricalIF quotient(const All& all, const Functional& f) const {
    check(f);
    EmpiricalIF out;
    const VectorXd b = base_.get(f);
    out.value = (all.at_eps.get(f) - b) / all.eps;
    out.value_half = (all.at_half.get(f) - b) / (0.5 * all.eps);
    const double scale = std::max(out.value.norm(), out.value_half.norm());
    out.discrepancy = scale > 0.0 ? (out.value - out.value_half).norm() / scale : 0.0;
    return out;
  }

  EmpiricalIF operator()(const Functional& f, const VectorXd& x, double eps = 1e-3) const {
    check(f);
    return quotient(perturb_both(x, eps), f);
  }

 private:
  FitOptions fit_options() const { return {opts_.tol, opts_.max_iter, opts_.diag_approx}; }

  static void require_converged(const FitResult& fit, const std::string& what) {
    if (!fit.converged) {
      throw ConvergenceFailure(what + " did not converge: " + std::to_string(fit.iterations) +
                               " iterations, last relative change " + std::to_string(fit.residual));
    }
  }

  void check(const Functional& f) const {
    const Index p = ref_.p();
    if (f.kind == Functional::Kind::Location) return;
    if (f.j < 0 || f.j >= p || (f.kind == Functional::Kind::EigenRatio && (f.i < 0 || f.i >= p))) {
      throw DomainError("eigen index out of range");
    }
    if (f.kind == Functional::Kind::EigenRatio && f.i == f.j) {
      throw DomainError("eigenvalue ratio needs i != j");
    }
  }

  static FunctionalValues extract(const LocationScatter& ls, const FunctionalValues* align) {
    const PCAModel m = pca(ls.V, ls.p());
    FunctionalValues v{ls.mu, m.eigenvalues, m.eigenvectors};
    if (align) {
      for (Index j = 0; j < v.eigenvectors.cols(); ++j) {
        if (v.eigenvectors.col(j).dot(align->eigenvectors.col(j)) < 0.0) v.eigenvectors.col(j) *= -1.0;
      }
    }
    return v;
  }

  DataSet ref_;
  WeightSpec spec_;
  InfluenceOptions opts_;
  LocationScatter base_ls_;
  FunctionalValues base_;
};

/// One-shot empirical IF; builds the base fit on every call.
inline EmpiricalIF empirical_if(const Functional& f, const VectorXd& x, const DataSet& reference,
                                double eps, const WeightSpec& spec, const InfluenceOptions& opts = {}) {
  return EmpiricalInfluence(reference, spec, opts)(f, x, eps);
}

}  // namespace sppca
