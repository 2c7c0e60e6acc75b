#pragma once

// Self-tuning of the initialization scale through the active-ratio curve
// a -> AR(a): fit over a grid, smooth the curve with a cubic smoothing spline
// and take the first interior local minimum of its slope.

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sppca/error.hpp"
#include "sppca/estimator.hpp"
#include "sppca/spline.hpp"
#include "sppca/types.hpp"
#include "sppca/weights.hpp"

namespace sppca {

struct ARCurve {
  std::vector<double> grid;
  std::vector<double> ar_raw;
  std::vector<double> ar_smooth;
  std::vector<double> slope;
};

struct TuningResult {
  double a_star = 0.0;
  std::size_t index = 0;  // position of a_star in the grid
  std::vector<double> candidates;
  bool fallback_used = false;
  double ar_at_a_star = 0.0;
};

/// Which smoothed sequence the local-minimum test is applied to.
enum class SelectionCriterion {
  SlopeMinimum,  // first local minimum of the slope of the smoothed curve
  CurveMinimum,  // local minima of the smoothed AR values themselves
};

/// Weighted fraction of observations strictly inside the fitted ball.
inline double active_ratio(const FitResult& fit, const DataSet& data, const WeightSpec& spec) {
  if (fit.failure) return 0.0;
  return active_set(data, fit.ls, spec).ratio;
}

/// Default grid size: n/5 rounded to the nearest integer, at least 10.
inline std::size_t default_grid_size(Index n) {
  return std::max<std::size_t>(10, static_cast<std::size_t>(std::lround(static_cast<double>(n) / 5.0)));
}

struct GridSearchOptions {
  double scan_lo = 0.05;   // in units of p
  double scan_hi = 50.0;   // in units of p
  int scan_points = 25;
  double rel_precision = 0.01;
};

struct GridBounds {
  double a_min = 0.0;
  double a_max = 0.0;
  double ar_at_min = 0.0;
  double ar_at_max = 0.0;
  /// False when no scan point reached AR = 1 and a_max fell back to the scan ceiling.
  bool reached_full = true;
};

namespace detail {

// AR counts as 1 when every observation is active; obs_weights sum to 1 only
// up to rounding.
inline constexpr double kFullActiveTol = 1e-12;

inline double probe_ar(const DataSet& data, const LocationScatter& base, double a,
                       const WeightSpec& spec, const FitOptions& opts) {
  try {
    return fit_sppca(data, a, scaled_init(base, a), spec, opts).active_ratio;
  } catch (const EmptyActiveSet&) {
    return 0.0;
  } catch (const DegenerateStep&) {
    return 0.0;
  } catch (const SingularScatter&) {
    return 0.0;
  }
}

// Smallest a with pred(AR(a)) given pred fails at lo and holds at hi.
template <typename Pred>
std::pair<double, double> bisect_scale(double lo, double hi, double ar_hi, Pred&& pred,
                                       const DataSet& data, const LocationScatter& base,
                                       const WeightSpec& spec, const FitOptions& opts,
                                       double rel_precision) {
  while (hi / lo > 1.0 + rel_precision) {
    const double mid = std::sqrt(lo * hi);
    const double ar = probe_ar(data, base, mid, spec, opts);
    if (pred(ar)) {
      hi = mid;
      ar_hi = ar;
    } else {
      lo = mid;
    }
  }
  return {hi, ar_hi};
}

}  // namespace detail

/// Locates a_min = min{a : AR(a) >= ell} and a_max = min{a : AR(a) = 1}
/// with a geometric scan over [0.05p, 50p] refined by bisection. Every probe
/// is a full fit.
inline GridBounds locate_grid_bounds(const DataSet& data, double ell, const WeightSpec& spec,
                                     const FitOptions& opts, const GridSearchOptions& gs = {},
                                     int threads = 0) {
  if (!(ell > 0.0 && ell < 1.0)) throw DomainError("ell must lie in (0, 1)");
  const LocationScatter base = initial_estimate(data);
  const double p = static_cast<double>(data.p());
  const double lo = gs.scan_lo * p, hi = gs.scan_hi * p;
  std::vector<double> scan(static_cast<std::size_t>(gs.scan_points));
  for (int i = 0; i < gs.scan_points; ++i) {
    scan[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (gs.scan_points - 1));
  }
  const std::vector<double> ar = parallel_map<double>(scan.size(), resolve_threads(threads), [&](std::size_t i) {
    return detail::probe_ar(data, base, scan[i], spec, opts);
  });

  const auto reaches_ell = [ell](double v) { return v >= ell; };
  const auto full = [](double v) { return v >= 1.0 - detail::kFullActiveTol; };

  GridBounds out;
  const auto first_ell = std::find_if(ar.begin(), ar.end(), reaches_ell);
  if (first_ell == ar.end()) {
    throw GridNotFound("active ratio never reaches " + std::to_string(ell) + " on [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  auto j = static_cast<std::size_t>(first_ell - ar.begin());
  if (j == 0) {
    out.a_min = scan[0];
    out.ar_at_min = ar[0];
  } else {
    std::tie(out.a_min, out.ar_at_min) =
        detail::bisect_scale(scan[j - 1], scan[j], ar[j], reaches_ell, data, base, spec, opts, gs.rel_precision);
  }

  const auto first_full = std::find_if(ar.begin() + static_cast<std::ptrdiff_t>(j), ar.end(), full);
  if (first_full == ar.end()) {
    out.a_max = scan.back();
    out.ar_at_max = ar.back();
    out.reached_full = false;
  } else {
    j = static_cast<std::size_t>(first_full - ar.begin());
    if (j == 0) {
      out.a_max = scan[0];
      out.ar_at_max = ar[0];
    } else {
      const double from = std::max(scan[j - 1], out.a_min);
      std::tie(out.a_max, out.ar_at_max) =
          from >= scan[j] ? std::pair{scan[j], ar[j]}
                          : detail::bisect_scale(from, scan[j], ar[j], full, data, base, spec, opts,
                                                 gs.rel_precision);
    }
  }
  if (!(out.a_max > out.a_min)) out.a_max = out.a_min * (1.0 + gs.rel_precision);
  return out;
}

/// m equally spaced points on [a_min, a_max].
inline std::vector<double> linear_grid(double lo, double hi, std::size_t m) {
  if (m < 2) throw DomainError("grid needs at least 2 points");
  if (!(hi > lo && lo > 0.0)) throw DomainError("grid range must satisfy 0 < lo < hi");
  std::vector<double> g(m);
  for (std::size_t j = 0; j < m; ++j) {
    g[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(m - 1);
  }
  g.back() = hi;
  return g;
}

inline std::vector<double> build_grid(const DataSet& data, double ell, std::size_t m, const WeightSpec& spec,
                                      const FitOptions& opts, int threads = 0) {
  if (m < 2) throw DomainError("grid size m must be at least 2");
  const GridBounds b = locate_grid_bounds(data, ell, spec, opts, {}, threads);
  return linear_grid(b.a_min, b.a_max, m);
}

struct SmoothedCurve {
  std::vector<double> ar_smooth;
  std::vector<double> slope;
  SplineFit spline;
};

/// Cubic smoothing spline of the AR curve (GCV penalty unless fixed), fitted
/// values clamped to [0, 1], slope from the spline's analytic derivative.
inline SmoothedCurve smooth_curve(const std::vector<double>& grid, const std::vector<double>& ar_raw,
                                  const SplineOptions& opts = {}) {
  SmoothedCurve out;
  out.spline = SmoothingSpline(grid, ar_raw).fit(opts);
  const auto m = grid.size();
  out.ar_smooth.resize(m);
  out.slope.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    out.ar_smooth[j] = std::clamp(out.spline.fitted[static_cast<Index>(j)], 0.0, 1.0);
    out.slope[j] = out.spline.slope[static_cast<Index>(j)];
  }
  return out;
}

/// Strict interior local minima of the slope (or of the smoothed curve);
/// a_star is the smallest, or a_m with fallback_used when there is none.
inline TuningResult select_a_star(const ARCurve& curve,
                                  SelectionCriterion criterion = SelectionCriterion::SlopeMinimum) {
  const auto m = curve.grid.size();
  if (m == 0 || curve.ar_raw.size() != m || curve.ar_smooth.size() != m || curve.slope.size() != m) {
    throw DimensionMismatch("AR curve sequences must share the grid length");
  }
  const std::vector<double>& s =
      criterion == SelectionCriterion::SlopeMinimum ? curve.slope : curve.ar_smooth;
  TuningResult out;
  std::vector<std::size_t> idx;
  for (std::size_t j = 1; j + 1 < m; ++j) {
    if (s[j] < s[j - 1] && s[j] < s[j + 1]) idx.push_back(j);
  }
  for (auto j : idx) out.candidates.push_back(curve.grid[j]);
  if (idx.empty()) {
    out.index = m - 1;
    out.fallback_used = true;
  } else {
    out.index = idx.front();
  }
  out.a_star = curve.grid[out.index];
  out.ar_at_a_star = curve.ar_raw[out.index];
  return out;
}

struct TuneOptions {
  double ell = 0.20;
  std::size_t grid_size = 0;  // 0: default_grid_size(n)
  SplineOptions spline;
  SelectionCriterion criterion = SelectionCriterion::SlopeMinimum;
  int threads = 0;
  /// Use this grid instead of the active-ratio search.
  std::vector<double> grid;
};

struct TuneOutcome {
  ARCurve curve;
  TuningResult result;
  std::vector<FitResult> fits;
  SplineFit spline;
};

/// Grid search, solution path, spline smoothing and selection in one call.
inline TuneOutcome tune(const DataSet& data, const WeightSpec& spec, const FitOptions& opts,
                        const TuneOptions& topts = {}) {
  TuneOutcome out;
  const std::size_t m = topts.grid_size ? topts.grid_size : default_grid_size(data.n());
  out.curve.grid = topts.grid.empty() ? build_grid(data, topts.ell, m, spec, opts, topts.threads) : topts.grid;
  out.fits = solution_set(data, out.curve.grid, spec, opts, topts.threads);
  out.curve.ar_raw.reserve(out.fits.size());
  for (const auto& f : out.fits) out.curve.ar_raw.push_back(f.failure ? 0.0 : f.active_ratio);
  SmoothedCurve sm = smooth_curve(out.curve.grid, out.curve.ar_raw, topts.spline);
  out.curve.ar_smooth = std::move(sm.ar_smooth);
  out.curve.slope = std::move(sm.slope);
  out.spline = std::move(sm.spline);
  out.result = select_a_star(out.curve, topts.criterion);
  return out;
}

}  // namespace sppca
