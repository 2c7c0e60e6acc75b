#pragma once

#include <cmath>
#include <string>

#include "sppca/error.hpp"
#include "sppca/mahalanobis.hpp"
#include "sppca/types.hpp"

namespace sppca {

enum class WeightKind {
  HardThresholdExponential,  // w(u) = exp(-u) 1{exp(-u) > alpha}
  Unit,                      // w(u) = 1, the unweighted moment equations
};

struct WeightSpec {
  double alpha = 0.05;
  WeightKind kind = WeightKind::HardThresholdExponential;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw DomainError("alpha must lie in (0, 1), got " + std::to_string(alpha));
    }
  }

  /// Distance at which the hard threshold cuts off: ln(1/alpha).
  double cutoff() const { return std::log(1.0 / alpha); }
};

// The indicator 1{exp(-u) > alpha} is evaluated in its equivalent form
// u < ln(1/alpha) so that the boundary maps to 0 and agrees bit-for-bit with
// in_ball(). exp(-ln(20)) rounds to 0.05000000000000001 in binary64.

inline double weight(double u, const WeightSpec& spec) {
  if (!(u >= 0.0)) throw DomainError("weight argument must be nonnegative");
  if (spec.kind == WeightKind::Unit) return 1.0;
  return u < spec.cutoff() ? std::exp(-u) : 0.0;
}

/// h(u) = w(u) u. Bounded by 1/e and zero beyond the cutoff.
inline double h(double u, const WeightSpec& spec) { return weight(u, spec) * u; }

inline bool in_ball(const Eigen::Ref<const VectorXd>& x, const LocationScatter& ls,
                    const WeightSpec& spec) {
  return mahalanobis(x, ls) < spec.cutoff();
}

}  // namespace sppca
