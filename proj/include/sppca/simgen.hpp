#pragma once

// Contaminated elliptical data,
//   (1 - pi) t_nu(0, V_0) + pi t_3(mu_out, V_out),  mu_out = c sqrt(p) u,
// and the replicate experiments comparing SPPCA with TME.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/random/sobol.hpp>

#include "sppca/error.hpp"
#include "sppca/estimator.hpp"
#include "sppca/metrics.hpp"
#include "sppca/parallel.hpp"
#include "sppca/pca.hpp"
#include "sppca/tuning.hpp"
#include "sppca/types.hpp"
#include "sppca/weights.hpp"

namespace sppca {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of replicate `index` under a base seed.
inline std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

struct SimConfig {
  Index n = 250;
  Index p = 50;
  Index k = 3;
  double nu = 10.0;
  double pi = 0.0;
  double c = 0.0;
  std::uint64_t seed = 1;
  /// Truncation radius ||x - mu_out|| <= r for the contaminant; unset means untruncated.
  std::optional<double> truncate_radius;

  void validate() const {
    if (n < 2) throw DomainError("n must be at least 2");
    if (p < 2) throw DomainError("p must be at least 2");
    if (k < 1 || k >= p) throw DomainError("k must satisfy 1 <= k < p");
    if (!(nu > 2.0)) throw DomainError("nu must exceed 2");
    if (!(pi >= 0.0 && pi < 1.0)) throw DomainError("pi must lie in [0, 1)");
    if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("c must be finite and nonnegative");
    if (truncate_radius && !(*truncate_radius > 0.0)) throw DomainError("truncation radius must be positive");
  }
};

enum class Origin : std::uint8_t { Main, Contaminant };

struct GroundTruth {
  MatrixXd V0;
  MatrixXd Gamma_k;
  VectorXd eigenvalues;  // of V0, descending
  VectorXd mu_out;
  MatrixXd V_out;
  std::vector<Origin> labels;

  double contaminant_fraction() const {
    if (labels.empty()) return 0.0;
    return static_cast<double>(std::count(labels.begin(), labels.end(), Origin::Contaminant)) /
           static_cast<double>(labels.size());
  }
};

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of diag(R) moved into Q.
inline MatrixXd random_orthogonal(Index p, Rng& rng) {
  if (p < 1) throw DomainError("p must be positive");
  std::normal_distribution<double> g;
  MatrixXd A(p, p);
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < p; ++i) A(i, j) = g(rng);
  }
  Eigen::HouseholderQR<MatrixXd> qr(A);
  MatrixXd Q = qr.householderQ();
  const MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < p; ++j) {
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  }
  return Q;
}

/// k signal eigenvalues on [2(1 + sqrt(p/n)), 10(1 + sqrt(p/n))] and p - k
/// noise eigenvalues on [0, 2], sorted descending; redrawn until adjacent
/// values differ by at least 1e-6.
inline VectorXd gen_eigenvalues(Index n, Index p, Index k, Rng& rng) {
  if (n < 1 || k < 1 || k >= p) throw DomainError("eigenvalue generation needs 1 <= k < p and n >= 1");
  const double f = 1.0 + std::sqrt(static_cast<double>(p) / static_cast<double>(n));
  std::uniform_real_distribution<double> signal(2.0 * f, 10.0 * f), noise(0.0, 2.0);
  std::vector<double> v(static_cast<std::size_t>(p));
  for (;;) {
    for (Index i = 0; i < p; ++i) v[static_cast<std::size_t>(i)] = i < k ? signal(rng) : noise(rng);
    std::sort(v.begin(), v.end(), std::greater<>());
    bool distinct = v.back() > 0.0;
    for (std::size_t i = 1; i < v.size() && distinct; ++i) distinct = v[i - 1] - v[i] >= 1e-6;
    if (distinct) break;
  }
  return Eigen::Map<VectorXd>(v.data(), p);
}

/// Draws from t_nu(mu, V): mu + Z / sqrt(s), Z ~ N(0, V), s ~ chi2(nu) / nu.
class MvtSampler {
 public:
  MvtSampler(double nu, VectorXd mu, const MatrixXd& V) : nu_(nu), mu_(std::move(mu)) {
    if (!(nu > 0.0)) throw DomainError("degrees of freedom must be positive");
    if (V.rows() != mu_.size() || V.cols() != mu_.size()) throw DimensionMismatch("t scatter must be p x p");
    Eigen::LLT<MatrixXd> llt(V);
    if (llt.info() != Eigen::Success) throw SingularScatter("t scatter must be positive definite");
    L_ = llt.matrixL();
  }

  VectorXd operator()(Rng& rng) const {
    std::normal_distribution<double> g;
    std::chi_squared_distribution<double> chi(nu_);
    VectorXd z(mu_.size());
    for (Index i = 0; i < z.size(); ++i) z[i] = g(rng);
    const double s = chi(rng) / nu_;
    return mu_ + (L_ * z) / std::sqrt(s);
  }

 private:
  double nu_;
  VectorXd mu_;
  MatrixXd L_;
};

inline MatrixXd sample_mvt(double nu, const VectorXd& mu, const MatrixXd& V, Index n, Rng& rng) {
  const MvtSampler draw(nu, mu, V);
  MatrixXd X(n, mu.size());
  for (Index i = 0; i < n; ++i) X.row(i) = draw(rng).transpose();
  return X;
}

/// Low-discrepancy N(mu, V) sample: Sobol points (first point skipped)
/// through the inverse normal CDF, then the Cholesky factor of V. Its
/// empirical distribution is far more regular than an i.i.d. draw, which
/// matters when a statistic reacts to single points crossing a threshold.
inline MatrixXd quasi_gaussian_sample(Index n, const VectorXd& mu, const MatrixXd& V) {
  const Index p = mu.size();
  if (n < 1 || p < 1) throw DomainError("quasi-random sample needs n >= 1 and p >= 1");
  if (p > 1000) throw DomainError("Sobol sequence supports at most 1000 dimensions");
  Eigen::LLT<MatrixXd> llt(V);
  if (V.rows() != p || V.cols() != p || llt.info() != Eigen::Success) {
    throw SingularScatter("quasi-random sample needs a p x p positive definite V");
  }
  boost::random::sobol qrng(static_cast<std::size_t>(p));
  qrng.discard(static_cast<std::uintmax_t>(p));
  const double span = static_cast<double>(qrng.max()) + 1.0;
  const boost::math::normal_distribution<double> normal;
  MatrixXd Z(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) Z(i, j) = boost::math::quantile(normal, (static_cast<double>(qrng()) + 0.5) / span);
  }
  const MatrixXd L = llt.matrixL();
  return (Z * L.transpose()).rowwise() + mu.transpose();
}

inline VectorXd random_unit_vector(Index p, Rng& rng) {
  std::normal_distribution<double> g;
  VectorXd u(p);
  do {
    for (Index i = 0; i < p; ++i) u[i] = g(rng);
  } while (!(u.norm() > 0.0));
  return u.normalized();
}

/// One draw of the mixture with its ground truth. The contaminant is
/// truncated to the Euclidean ball of radius cfg.truncate_radius around
/// mu_out when that is set.
inline std::pair<DataSet, GroundTruth> gen_mixture(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Index p = cfg.p;
  GroundTruth gt;
  const MatrixXd G = random_orthogonal(p, rng);
  gt.eigenvalues = gen_eigenvalues(cfg.n, p, cfg.k, rng);
  gt.V0 = G * gt.eigenvalues.asDiagonal() * G.transpose();
  gt.V0 = 0.5 * (gt.V0 + gt.V0.transpose());
  gt.Gamma_k = G.leftCols(cfg.k);
  const MatrixXd Go = random_orthogonal(p, rng);
  const VectorXd lo = gen_eigenvalues(cfg.n, p, cfg.k, rng);
  gt.V_out = Go * lo.asDiagonal() * Go.transpose();
  gt.V_out = 0.5 * (gt.V_out + gt.V_out.transpose());
  gt.mu_out = cfg.c * std::sqrt(static_cast<double>(p)) * random_unit_vector(p, rng);

  const MvtSampler main(cfg.nu, VectorXd::Zero(p), gt.V0);
  const MvtSampler cont(3.0, gt.mu_out, gt.V_out);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MatrixXd X(cfg.n, p);
  gt.labels.resize(static_cast<std::size_t>(cfg.n));
  for (Index i = 0; i < cfg.n; ++i) {
    const bool contaminant = unif(rng) < cfg.pi;
    gt.labels[static_cast<std::size_t>(i)] = contaminant ? Origin::Contaminant : Origin::Main;
    if (!contaminant) {
      X.row(i) = main(rng).transpose();
      continue;
    }
    VectorXd x = cont(rng);
    if (cfg.truncate_radius) {
      while ((x - gt.mu_out).norm() > *cfg.truncate_radius) x = cont(rng);
    }
    X.row(i) = x.transpose();
  }
  return {DataSet(std::move(X)), std::move(gt)};
}

/// Default truncation radius of the separable generator, as a fraction of ||mu_out||.
inline constexpr double kSeparableRadiusFraction = 0.5;

/// Mixture whose contaminant lives in a Euclidean ball around mu_out that
/// stays clear of the main component's core, so a separating scale exists.
inline std::pair<DataSet, GroundTruth> gen_separable_mixture(SimConfig cfg) {
  if (!cfg.truncate_radius) {
    cfg.truncate_radius = kSeparableRadiusFraction * cfg.c * std::sqrt(static_cast<double>(cfg.p));
  }
  if (!(*cfg.truncate_radius > 0.0)) throw DomainError("separable generator needs c > 0");
  return gen_mixture(cfg);
}

enum class Method { SppcaAStar, SppcaOpt, Tme };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::SppcaAStar: return "sppca_astar";
    case Method::SppcaOpt: return "sppca_opt";
    case Method::Tme: return "tme";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  if (s == "sppca_astar") return Method::SppcaAStar;
  if (s == "sppca_opt") return Method::SppcaOpt;
  if (s == "tme") return Method::Tme;
  throw DomainError("unknown method '" + s + "'");
}

struct ExperimentOptions {
  std::vector<Method> methods{Method::SppcaAStar, Method::SppcaOpt, Method::Tme};
  int replicates = 20;
  WeightSpec spec;
  FitOptions fit;  // diagonal approximation on by default
  /// SPPCA grid: grid_points equally spaced values on [grid_lo p, grid_hi p].
  std::size_t grid_points = 50;
  double grid_lo = 0.2;
  double grid_hi = 3.0;
  SplineOptions spline;
  SelectionCriterion criterion = SelectionCriterion::SlopeMinimum;
  /// Use the separable generator for every config.
  bool separable = false;
  int threads = 0;
};

/// Outcome of one replicate; rho is NaN for a failed method.
struct ReplicateRecord {
  std::uint64_t seed = 0;
  std::vector<double> rho;  // per method, in ExperimentOptions::methods order
  double a_star = std::numeric_limits<double>::quiet_NaN();
  double ar_at_a_star = std::numeric_limits<double>::quiet_NaN();
  double contaminant_fraction = 0.0;
  std::vector<std::string> errors;
};

struct ExperimentRow {
  SimConfig config;
  Method method = Method::SppcaAStar;
  double mean_rho = std::numeric_limits<double>::quiet_NaN();
  double se_rho = std::numeric_limits<double>::quiet_NaN();
  int n_ok = 0;
  int n_fail = 0;
  bool valid = true;  // false when more than 20% of replicates failed
  std::vector<double> replicate_rho;
};

struct ExperimentTable {
  std::vector<ExperimentRow> rows;
  /// Per config, per replicate details.
  std::vector<std::vector<ReplicateRecord>> replicates;
};

inline double subspace_rho(const MatrixXd& V_hat, const MatrixXd& Gamma_k) {
  return similarity_rho(pca(V_hat, Gamma_k.cols()).eigenvectors, Gamma_k);
}

/// All methods on one simulated data set.
inline ReplicateRecord run_replicate(const SimConfig& cfg, const ExperimentOptions& opts) {
  ReplicateRecord rec;
  rec.seed = cfg.seed;
  rec.rho.assign(opts.methods.size(), std::numeric_limits<double>::quiet_NaN());
  const auto [data, truth] = opts.separable ? gen_separable_mixture(cfg) : gen_mixture(cfg);
  rec.contaminant_fraction = truth.contaminant_fraction();

  const double p = static_cast<double>(cfg.p);
  TuneOptions topts;
  topts.grid = linear_grid(opts.grid_lo * p, opts.grid_hi * p, opts.grid_points);
  topts.spline = opts.spline;
  topts.criterion = opts.criterion;
  topts.threads = 1;

  std::optional<TuneOutcome> tuned;
  std::string tune_error;
  try {
    tuned = tune(data, opts.spec, opts.fit, topts);
  } catch (const Error& e) {
    tune_error = e.kind() + ": " + e.what();
  }
  const FitResult* selected = nullptr;
  if (tuned) {
    rec.a_star = tuned->result.a_star;
    rec.ar_at_a_star = tuned->result.ar_at_a_star;
    const FitResult& f = tuned->fits[tuned->result.index];
    if (!f.failure) selected = &f;
  }

  for (std::size_t m = 0; m < opts.methods.size(); ++m) {
    try {
      switch (opts.methods[m]) {
        case Method::SppcaAStar:
          if (!selected) throw ConvergenceFailure(tune_error.empty() ? "fit at a_star failed" : tune_error);
          rec.rho[m] = subspace_rho(selected->ls.V, truth.Gamma_k);
          break;
        case Method::SppcaOpt: {
          if (!tuned) throw ConvergenceFailure(tune_error);
          double best = -1.0;
          for (const auto& f : tuned->fits) {
            if (!f.failure) best = std::max(best, subspace_rho(f.ls.V, truth.Gamma_k));
          }
          if (best < 0.0) throw ConvergenceFailure("every fit on the path failed");
          rec.rho[m] = best;
          break;
        }
        case Method::Tme: {
          if (!selected) throw ConvergenceFailure("TME needs the location at a_star");
          FitOptions fo = opts.fit;
          const TmeResult t = fit_tme(data, selected->ls.mu, fo);
          rec.rho[m] = subspace_rho(t.ls.V, truth.Gamma_k);
          break;
        }
      }
    } catch (const Error& e) {
      rec.errors.push_back(method_name(opts.methods[m]) + ": " + e.kind() + ": " + e.what());
      rec.rho[m] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return rec;
}

/// Replicates run concurrently; results are reduced in replicate order, so
/// the table does not depend on the thread count.
inline ExperimentTable run_experiment(const std::vector<SimConfig>& configs, const ExperimentOptions& opts) {
  if (opts.replicates < 1) throw DomainError("replicates must be at least 1");
  if (opts.methods.empty()) throw DomainError("at least one method is required");
  if (opts.grid_points < 4) throw DomainError("the SPPCA grid needs at least 4 points");
  if (!(opts.grid_hi > opts.grid_lo && opts.grid_lo > 0.0)) throw DomainError("grid bounds must satisfy 0 < lo < hi");
  for (const auto& cfg : configs) cfg.validate();

  ExperimentTable table;
  const int threads = resolve_threads(opts.threads);
  for (const auto& cfg : configs) {
    std::vector<ReplicateRecord> recs =
        parallel_map<ReplicateRecord>(static_cast<std::size_t>(opts.replicates), threads, [&](std::size_t r) {
          SimConfig c = cfg;
          c.seed = replicate_seed(cfg.seed, r);
          return run_replicate(c, opts);
        });
    for (std::size_t m = 0; m < opts.methods.size(); ++m) {
      ExperimentRow row;
      row.config = cfg;
      row.method = opts.methods[m];
      double sum = 0.0, sq = 0.0;
      for (const auto& rec : recs) {
        const double v = rec.rho[m];
        row.replicate_rho.push_back(v);
        if (std::isnan(v)) {
          ++row.n_fail;
        } else {
          ++row.n_ok;
          sum += v;
        }
      }
      if (row.n_ok > 0) {
        row.mean_rho = sum / row.n_ok;
        for (double v : row.replicate_rho) {
          if (!std::isnan(v)) sq += (v - row.mean_rho) * (v - row.mean_rho);
        }
        row.se_rho = row.n_ok > 1 ? std::sqrt(sq / (row.n_ok - 1) / row.n_ok) : 0.0;
      }
      row.valid = row.n_fail <= 0.2 * opts.replicates;
      table.rows.push_back(std::move(row));
    }
    table.replicates.push_back(std::move(recs));
  }
  return table;
}

}  // namespace sppca
