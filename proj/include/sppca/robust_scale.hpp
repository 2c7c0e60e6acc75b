#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sppca/error.hpp"
#include "sppca/types.hpp"

namespace sppca {

// Tuning constants of the tau-scale (Yohai and Zamar, 1988).
inline constexpr double kTauC1 = 4.5;
inline constexpr double kTauC2 = 3.0;
// E[min((Z/q)^2, c2^2)] * q^2 for Z ~ N(0,1), q = Phi^{-1}(3/4), c2 = 3.
// Makes the tau-scale consistent for sigma at the Gaussian. Reproduced by
// quadrature in tests/test_robust_scale.cpp.
inline constexpr double kTauGaussianConsistency = 0.9247153921761307;

inline constexpr double kMinTauScale = 1e-12;

inline double median(std::vector<double> v) {
  if (v.empty()) throw EmptyData("median of empty sequence");
  const auto n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

inline double median(const Eigen::Ref<const VectorXd>& x) {
  return median(std::vector<double>(x.data(), x.data() + x.size()));
}

/// Univariate tau-scale: raw MAD start, Tukey-biweight location, truncated
/// quadratic rho for the scale.
inline double tau_scale(const Eigen::Ref<const VectorXd>& x) {
  const Index n = x.size();
  if (n < 2) throw EmptyData("tau-scale needs at least two values");
  const double med = median(x);
  const VectorXd absdev = (x.array() - med).abs().matrix();
  const double s0 = median(absdev);
  if (!(s0 > 0.0)) return 0.0;

  double sw = 0.0;
  double swx = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double r = absdev[i] / (s0 * kTauC1);
    if (r < 1.0) {
      const double w = (1.0 - r * r) * (1.0 - r * r);
      sw += w;
      swx += w * x[i];
    }
  }
  const double loc = swx / sw;

  double rho = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double u = (x[i] - loc) / s0;
    rho += std::min(u * u, kTauC2 * kTauC2);
  }
  return s0 * std::sqrt(rho / static_cast<double>(n) / kTauGaussianConsistency);
}

/// Coordinate-wise median and diagonal matrix of squared tau-scales.
/// Observation weights are ignored: this is a starting value only.
inline LocationScatter initial_estimate(const DataSet& data) {
  data.validate();
  const Index p = data.p();
  LocationScatter out;
  out.mu.resize(p);
  out.V = MatrixXd::Zero(p, p);
  for (Index j = 0; j < p; ++j) {
    const VectorXd col = data.X.col(j);
    out.mu[j] = median(col);
    const double s = tau_scale(col);
    if (!(s >= kMinTauScale)) {
      const std::string name =
          data.column_names.empty() ? std::to_string(j) : data.column_names[j];
      throw DegenerateScale("column " + name + " has tau-scale below 1e-12");
    }
    out.V(j, j) = s * s;
  }
  return out;
}

}  // namespace sppca
