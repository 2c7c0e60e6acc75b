#pragma once

// Cubic smoothing spline in Reinsch form (Green and Silverman, 1994):
// minimize sum_i (y_i - g(t_i))^2 + lambda * int g''(t)^2 dt over natural
// cubic splines with knots at the data. With Q, R the banded matrices of the
// value/second-derivative relation and K = Q R^{-1} Q', the fitted values are
// (I + lambda K)^{-1} y. K is diagonalized once so that every lambda costs O(m).

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sppca/error.hpp"
#include "sppca/types.hpp"

namespace sppca {

namespace detail {

inline std::string short_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

struct SplineOptions {
  /// Fixed penalty on the [0,1]-rescaled abscissa; GCV when unset.
  std::optional<double> lambda;
  /// Fixed effective degrees of freedom (trace of the hat matrix); overrides GCV.
  std::optional<double> df;
  /// Upper end of the df range searched by GCV. AR curves have correlated
  /// deviations that GCV reads as signal; an optimum on this boundary counts
  /// as a GCV failure.
  double gcv_max_df = 12.0;
};

struct SplineFit {
  VectorXd fitted;
  VectorXd slope;  // analytic first derivative at the knots
  double lambda = 0.0;
  double df = 0.0;
  bool gcv_fallback = false;
  std::string warning;
};

class SmoothingSpline {
 public:
  SmoothingSpline(std::vector<double> t, std::vector<double> y) : t_(std::move(t)), y_(std::move(y)) {
    const auto m = t_.size();
    if (m < 4) throw DomainError("smoothing spline needs at least 4 points");
    if (y_.size() != m) throw DimensionMismatch("abscissa and ordinate lengths differ");
    for (std::size_t i = 1; i < m; ++i) {
      if (!(t_[i] > t_[i - 1])) throw DomainError("spline abscissae must be strictly increasing");
    }
    span_ = t_.back() - t_.front();
    const Index n = static_cast<Index>(m);
    u_.resize(n);
    for (Index i = 0; i < n; ++i) u_[i] = (t_[static_cast<std::size_t>(i)] - t_.front()) / span_;
    h_ = u_.tail(n - 1) - u_.head(n - 1);

    Q_ = MatrixXd::Zero(n, n - 2);
    R_ = MatrixXd::Zero(n - 2, n - 2);
    for (Index j = 1; j + 1 < n; ++j) {
      const Index c = j - 1;
      Q_(j - 1, c) = 1.0 / h_[j - 1];
      Q_(j, c) = -1.0 / h_[j - 1] - 1.0 / h_[j];
      Q_(j + 1, c) = 1.0 / h_[j];
      R_(c, c) = (h_[j - 1] + h_[j]) / 3.0;
      if (c + 1 < n - 2) {
        R_(c, c + 1) = h_[j] / 6.0;
        R_(c + 1, c) = h_[j] / 6.0;
      }
    }
    R_llt_.compute(R_);
    const MatrixXd K = Q_ * R_llt_.solve(Q_.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (K + K.transpose()));
    evals_ = es.eigenvalues().cwiseMax(0.0);
    // Constants and lines span the exact null space; clear its rounding noise.
    const double top = evals_.maxCoeff();
    for (Index i = 0; i < n; ++i) {
      if (evals_[i] < 1e-10 * top) evals_[i] = 0.0;
    }
    evecs_ = es.eigenvectors();
    ycoef_ = evecs_.transpose() * Eigen::Map<const VectorXd>(y_.data(), n);
  }

  Index size() const { return static_cast<Index>(t_.size()); }

  double trace_hat(double lambda) const {
    return (1.0 / (1.0 + lambda * evals_.array())).sum();
  }

  double gcv(double lambda) const {
    const double n = static_cast<double>(size());
    const auto shrink = (lambda * evals_.array()) / (1.0 + lambda * evals_.array());
    const double rss = (shrink * ycoef_.array()).square().sum();
    const double denom = n - trace_hat(lambda);
    return n * rss / (denom * denom);
  }

  /// Penalty giving trace(A) = df for 2 <= df <= m, by bisection on log lambda.
  double lambda_for_df(double df) const {
    const double n = static_cast<double>(size());
    if (!(df >= 2.0 && df <= n)) throw DomainError("effective degrees of freedom must lie in [2, m]");
    if (df <= 2.0 + 1e-9) return lambda_ceiling();
    if (df >= n - 1e-9) return 0.0;
    double lo = std::log(lambda_floor()), hi = std::log(lambda_ceiling());
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (trace_hat(std::exp(mid)) > df ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
  }

  SplineFit fit(const SplineOptions& opts = {}) const {
    SplineFit out;
    if (opts.df) {
      out.lambda = lambda_for_df(*opts.df);
    } else if (opts.lambda) {
      if (!(*opts.lambda >= 0.0)) throw DomainError("spline penalty must be nonnegative");
      out.lambda = *opts.lambda;
    } else {
      const auto sel = select_gcv(opts.gcv_max_df);
      if (sel) {
        out.lambda = *sel;
      } else {
        const double df = std::max(2.0, std::min(8.0, static_cast<double>(size()) - 2.0));
        out.lambda = lambda_for_df(df);
        out.gcv_fallback = true;
        out.warning = "GCV found no interior optimum with df <= " + detail::short_number(opts.gcv_max_df) +
                      "; using fixed effective df " + detail::short_number(df);
      }
    }
    out.df = trace_hat(out.lambda);
    evaluate(out);
    return out;
  }

 private:
  double lambda_floor() const {
    const double top = evals_.maxCoeff();
    return top > 0.0 ? 1e-8 / top : 1e-8;
  }
  double lambda_ceiling() const {
    double small = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < evals_.size(); ++i) {
      if (evals_[i] > 1e-12 * evals_.maxCoeff()) small = std::min(small, evals_[i]);
    }
    return std::isfinite(small) ? 1e8 / small : 1e8;
  }

  // Coarse log-grid scan followed by golden-section refinement. Returns
  // nothing when GCV is non-finite or its minimum sits at the rough end of
  // the range.
  std::optional<double> select_gcv(double max_df) const {
    if (!(max_df > 2.0)) throw DomainError("GCV df cap must exceed 2");
    const double n = static_cast<double>(size());
    const double lo = std::log(max_df < n ? lambda_for_df(max_df) : lambda_floor());
    const double hi = std::log(lambda_ceiling());
    constexpr int kScan = 201;
    std::vector<double> vals(kScan);
    int best = -1;
    for (int i = 0; i < kScan; ++i) {
      const double x = lo + (hi - lo) * i / (kScan - 1);
      vals[i] = gcv(std::exp(x));
      if (!std::isfinite(vals[i])) return std::nullopt;
      // Ties prefer the smoother (larger lambda) end.
      if (best < 0 || vals[i] <= vals[best]) best = i;
    }
    if (best == 0) return std::nullopt;
    if (best == kScan - 1) return std::exp(hi);
    const double step = (hi - lo) / (kScan - 1);
    double a = lo + step * (best - 1), b = lo + step * (best + 1);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = gcv(std::exp(c)), fd = gcv(std::exp(d));
    for (int it = 0; it < 100 && (b - a) > 1e-10; ++it) {
      if (fc < fd) {
        b = d; d = c; fd = fc;
        c = b - g * (b - a); fc = gcv(std::exp(c));
      } else {
        a = c; c = d; fc = fd;
        d = a + g * (b - a); fd = gcv(std::exp(d));
      }
    }
    return std::exp(0.5 * (a + b));
  }

  void evaluate(SplineFit& out) const {
    const Index n = size();
    const VectorXd shrink = (1.0 / (1.0 + out.lambda * evals_.array())).matrix();
    out.fitted = evecs_ * shrink.cwiseProduct(ycoef_);
    VectorXd gamma = VectorXd::Zero(n);
    gamma.segment(1, n - 2) = R_llt_.solve(Q_.transpose() * out.fitted);
    out.slope.resize(n);
    for (Index i = 0; i + 1 < n; ++i) {
      out.slope[i] = (out.fitted[i + 1] - out.fitted[i]) / h_[i] -
                     h_[i] * (2.0 * gamma[i] + gamma[i + 1]) / 6.0;
    }
    const double hl = h_[n - 2];
    out.slope[n - 1] = (out.fitted[n - 1] - out.fitted[n - 2]) / hl +
                       hl * (gamma[n - 2] + 2.0 * gamma[n - 1]) / 6.0;
    out.slope /= span_;
  }

  std::vector<double> t_, y_;
  double span_ = 1.0;
  VectorXd u_, h_;
  MatrixXd Q_, R_;
  Eigen::LLT<MatrixXd> R_llt_;
  VectorXd evals_;
  MatrixXd evecs_;
  VectorXd ycoef_;
};

}  // namespace sppca
