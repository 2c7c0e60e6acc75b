#pragma once

// Fixed-point solvers for the weighted Tyler-type estimating equations:
//
//   mu = sum_i pi_i w_i x_i / sum_i pi_i w_i
//   V  = p sum_i pi_i w_i (x_i - mu)(x_i - mu)' / sum_i pi_i w_i d_i
//
// with w_i = w(d(x_i, mu, V)) and pi_i the observation weights. Any positive
// multiple of the population scatter solves the second equation; the
// initialization scale selects one element of the sample solution set.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "sppca/error.hpp"
#include "sppca/mahalanobis.hpp"
#include "sppca/parallel.hpp"
#include "sppca/robust_scale.hpp"
#include "sppca/types.hpp"
#include "sppca/weights.hpp"

namespace sppca {

/// How the scatter update fixes its scale.
enum class ScaleMode {
  Free,             // V = p S_w / sum w d; the scale is inherited from the start
  UnitDeterminant,  // V = S_w / |S_w|^{1/p}; the constrained functional |V| = 1
};

namespace detail {

struct StepSums {
  VectorXd d;
  VectorXd c;  // pi_i * w_i
  double sum_c = 0.0;
  double sum_cd = 0.0;
};

inline StepSums weighted_sums(const DataSet& data, const LocationScatter& ls,
                              const WeightSpec& spec) {
  StepSums s;
  s.d = ScatterMetric(ls).rows(data.X);
  s.c.resize(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    s.c[i] = data.obs_weights[i] * weight(s.d[i], spec);
  }
  s.sum_c = s.c.sum();
  s.sum_cd = s.c.dot(s.d);
  return s;
}

/// sum_i c_i (x_i - mu)(x_i - mu)' over rows with c_i > 0.
inline MatrixXd weighted_outer(const MatrixXd& X, const VectorXd& mu, const VectorXd& c) {
  std::vector<Index> active;
  active.reserve(static_cast<std::size_t>(X.rows()));
  for (Index i = 0; i < X.rows(); ++i) {
    if (c[i] > 0.0) active.push_back(i);
  }
  const Index m = static_cast<Index>(active.size());
  MatrixXd Z(m, X.cols());
  VectorXd sc(m);
  for (Index r = 0; r < m; ++r) {
    Z.row(r) = X.row(active[r]) - mu.transpose();
    sc[r] = std::sqrt(c[active[r]]);
  }
  Z = sc.asDiagonal() * Z;
  MatrixXd S = MatrixXd::Zero(X.cols(), X.cols());
  S.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose());
  return S.selfadjointView<Eigen::Lower>();
}

inline std::string at_iteration(int iteration) {
  return iteration > 0 ? " at iteration " + std::to_string(iteration) : std::string();
}

inline double log_det_spd(const MatrixXd& S) {
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw SingularScatter("weighted scatter is not positive definite");
  const VectorXd piv = MatrixXd(llt.matrixL()).diagonal();
  if (!(piv.minCoeff() > 0.0)) throw SingularScatter("weighted scatter is singular");
  return 2.0 * piv.array().log().sum();
}

inline LocationScatter step(const DataSet& data, const LocationScatter& current,
                            const WeightSpec& spec, double tau, ScaleMode mode,
                            int iteration) {
  const StepSums s = weighted_sums(data, current, spec);
  if (!(s.sum_c > 0.0)) {
    throw EmptyActiveSet("no observation has positive weight" + at_iteration(iteration));
  }
  const Index p = data.p();
  LocationScatter next;
  next.diag_approx = current.diag_approx;
  next.mu = data.X.transpose() * s.c / s.sum_c;

  MatrixXd S = weighted_outer(data.X, current.mu, s.c);
  if (mode == ScaleMode::UnitDeterminant) {
    const double ld = log_det_spd(S);
    next.V = S * std::exp(-ld / static_cast<double>(p));
  } else {
    if (!(s.sum_cd > 0.0)) {
      throw DegenerateStep("all active observations sit at the location" + at_iteration(iteration));
    }
    next.V = (static_cast<double>(p) / s.sum_cd) * S;
  }
  if (tau > 0.0) {
    next.V = next.V / (1.0 + tau);
    next.V.diagonal().array() += tau / (1.0 + tau);
  }
  return next;
}

inline double relative_change(const LocationScatter& prev, const LocationScatter& next) {
  const double dmu = (next.mu - prev.mu).norm() / (1.0 + prev.mu.norm());
  const double dv = (next.V - prev.V).norm() / (1.0 + prev.V.norm());
  return std::max(dmu, dv);
}

}  // namespace detail

/// One application of the fixed-point map. Distances use diag(V) iff
/// current.diag_approx.
inline LocationScatter fixed_point_step(const DataSet& data, const LocationScatter& current,
                                        const WeightSpec& spec) {
  current.validate();
  if (current.p() != data.p()) throw DimensionMismatch("location dimension does not match data");
  return detail::step(data, current, spec, 0.0, ScaleMode::Free, 0);
}

struct ActiveSet {
  std::vector<bool> mask;
  double ratio = 0.0;
};

/// Ball membership d(x_i, mu, V) < ln(1/alpha) for every row, and its
/// obs_weights-weighted mean.
inline ActiveSet active_set(const DataSet& data, const LocationScatter& ls, const WeightSpec& spec) {
  const VectorXd d = ScatterMetric(ls).rows(data.X);
  const double cut = spec.cutoff();
  ActiveSet out;
  out.mask.resize(static_cast<std::size_t>(data.n()));
  // Normalized by the total so that a full ball gives exactly 1.
  long double active = 0.0L, total = 0.0L;
  for (Index i = 0; i < data.n(); ++i) {
    const bool in = d[i] < cut;
    out.mask[static_cast<std::size_t>(i)] = in;
    total += data.obs_weights[i];
    if (in) active += data.obs_weights[i];
  }
  out.ratio = static_cast<double>(active / total);
  return out;
}

namespace detail {

inline FitResult iterate(const DataSet& data, double a, LocationScatter ls, const WeightSpec& spec,
                         const FitOptions& opts, double tau, ScaleMode mode) {
  spec.validate();
  data.validate();
  if (!(a > 0.0)) throw DomainError("scale a must be positive");
  if (!(tau >= 0.0)) throw DomainError("tau must be nonnegative");
  ls.validate();
  if (ls.p() != data.p()) throw DimensionMismatch("initial location dimension does not match data");
  FitResult fit;
  fit.a = a;
  for (int it = 1; it <= opts.max_iter; ++it) {
    LocationScatter next = step(data, ls, spec, tau, mode, it);
    fit.residual = relative_change(ls, next);
    fit.iterations = it;
    ls = std::move(next);
    if (fit.residual <= opts.tol) {
      fit.converged = true;
      break;
    }
  }
  const ActiveSet act = active_set(data, ls, spec);
  // The diagonal metric keeps iterating on a rank-deficient scatter; a
  // collapsed fixed point is not a usable solution.
  if (Eigen::LLT<MatrixXd>(ls.V).info() != Eigen::Success) {
    const auto n_active = std::count(act.mask.begin(), act.mask.end(), true);
    throw SingularScatter("fitted scatter is singular with " + std::to_string(n_active) +
                          " active observations in dimension " + std::to_string(data.p()));
  }
  fit.active_mask = act.mask;
  fit.active_ratio = act.ratio;
  fit.ls = std::move(ls);
  return fit;
}

}  // namespace detail

/// (mu, a V) from a base estimate.
inline LocationScatter scaled_init(const LocationScatter& base, double a) {
  LocationScatter out = base;
  out.V *= a;
  return out;
}

/// Iterates the fixed-point map from `init` (conventionally (mu~, a V~)).
/// The diagonal approximation follows opts.diag_approx. Non-convergence is
/// reported through FitResult::converged.
inline FitResult fit_sppca(const DataSet& data, double a, LocationScatter init,
                           const WeightSpec& spec, const FitOptions& opts = {}) {
  init.diag_approx = opts.diag_approx;
  return detail::iterate(data, a, std::move(init), spec, opts, 0.0, ScaleMode::Free);
}

/// Fit of the regularized equation V = (p S_w / sum w d + tau I) / (1 + tau),
/// started at (mu~, a V~).
inline FitResult fit_regularized(const DataSet& data, double a, double tau, const WeightSpec& spec,
                                 const FitOptions& opts = {}) {
  LocationScatter init = scaled_init(initial_estimate(data), a);
  init.diag_approx = opts.diag_approx;
  return detail::iterate(data, a, std::move(init), spec, opts, tau, ScaleMode::Free);
}

/// Solution of the scale-constrained equations with |V| = 1. This is the
/// functional whose influence functions have closed forms.
inline FitResult fit_unit_determinant(const DataSet& data, LocationScatter init,
                                      const WeightSpec& spec, const FitOptions& opts = {}) {
  init.diag_approx = opts.diag_approx;
  return detail::iterate(data, 1.0, std::move(init), spec, opts, 0.0, ScaleMode::UnitDeterminant);
}

/// One fit per grid value, each cold-started at (mu~, a V~). Failed fits are
/// kept with converged = false and the error message.
inline std::vector<FitResult> solution_set(const DataSet& data, const std::vector<double>& grid,
                                           const WeightSpec& spec, const FitOptions& opts = {},
                                           int threads = 0) {
  if (grid.empty()) throw DomainError("grid must be nonempty");
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!(grid[j] > 0.0)) throw DomainError("grid values must be positive");
    if (j > 0 && !(grid[j] > grid[j - 1])) throw DomainError("grid must be strictly increasing");
  }
  const LocationScatter base = initial_estimate(data);
  return parallel_map<FitResult>(grid.size(), resolve_threads(threads), [&](std::size_t j) {
    try {
      return fit_sppca(data, grid[j], scaled_init(base, grid[j]), spec, opts);
    } catch (const Error& e) {
      FitResult failed;
      failed.a = grid[j];
      failed.converged = false;
      failed.failure = e.kind() + ": " + e.what();
      return failed;
    }
  });
}

struct EquationResidual {
  double location = 0.0;
  double scatter = 0.0;
  double max() const { return std::max(location, scatter); }
};

/// Relative residuals of the sample estimating equations at (mu, V):
///   |sum pi w (x - mu)| / (sum pi w * sqrt(tr V / p))
///   |sum pi w {(x - mu)(x - mu)' - d V / p}|_F / (sum pi w d / p * |V|_F)
inline EquationResidual estimating_equation_residual(const DataSet& data, const LocationScatter& ls,
                                                     const WeightSpec& spec) {
  const detail::StepSums s = detail::weighted_sums(data, ls, spec);
  if (!(s.sum_c > 0.0)) throw EmptyActiveSet("no observation has positive weight");
  const double p = static_cast<double>(data.p());
  EquationResidual r;
  const VectorXd loc = data.X.transpose() * s.c - s.sum_c * ls.mu;
  r.location = loc.norm() / (s.sum_c * std::sqrt(ls.V.trace() / p));
  const MatrixXd S = detail::weighted_outer(data.X, ls.mu, s.c);
  r.scatter = (S - (s.sum_cd / p) * ls.V).norm() / ((s.sum_cd / p) * ls.V.norm());
  return r;
}

struct TmeResult {
  LocationScatter ls;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
  /// Observations dropped because they coincide with mu.
  Index zero_distance_points = 0;
};

/// Tyler's M-estimator of shape for a fixed location, normalized to
/// trace(V) = p after every update.
inline TmeResult fit_tme(const DataSet& data, const VectorXd& mu, const FitOptions& opts = {}) {
  data.validate();
  const Index p = data.p();
  if (mu.size() != p) throw DimensionMismatch("TME location dimension does not match data");
  TmeResult out;
  out.ls.mu = mu;
  out.ls.V = MatrixXd::Identity(p, p);
  out.ls.diag_approx = opts.diag_approx;

  const MatrixXd Z = data.X.rowwise() - mu.transpose();
  for (int it = 1; it <= opts.max_iter; ++it) {
    const VectorXd d = ScatterMetric(out.ls).rows(data.X);
    VectorXd c = VectorXd::Zero(data.n());
    Index dropped = 0;
    for (Index i = 0; i < data.n(); ++i) {
      if (d[i] > 0.0) {
        c[i] = data.obs_weights[i] / d[i];
      } else {
        ++dropped;
      }
    }
    MatrixXd M = MatrixXd::Zero(p, p);
    M.selfadjointView<Eigen::Lower>().rankUpdate((c.cwiseSqrt().asDiagonal() * Z).transpose());
    MatrixXd next = M.selfadjointView<Eigen::Lower>();
    const double tr = next.trace();
    if (!(tr > 0.0)) throw DegenerateStep("TME update has zero trace" + detail::at_iteration(it));
    next *= static_cast<double>(p) / tr;
    out.residual = (next - out.ls.V).norm() / (1.0 + out.ls.V.norm());
    out.ls.V = std::move(next);
    out.iterations = it;
    out.zero_distance_points = dropped;
    if (out.residual <= opts.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace sppca
