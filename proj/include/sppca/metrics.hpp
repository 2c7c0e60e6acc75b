#pragma once

// Subspace similarity, closed-form influence functions of the
// scale-constrained functionals (|V| = 1) and their asymptotic variances.

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/constants/constants.hpp>
#include <Eigen/Dense>

#include "sppca/error.hpp"
#include "sppca/mahalanobis.hpp"
#include "sppca/types.hpp"
#include "sppca/weights.hpp"

namespace sppca {

/// rho = mean singular value of Gamma_hat' Gamma, clamped to [0, 1].
inline double similarity_rho(const MatrixXd& gamma_hat, const MatrixXd& gamma) {
  if (gamma_hat.rows() != gamma.rows() || gamma_hat.cols() != gamma.cols() || gamma.cols() < 1) {
    throw DimensionMismatch("similarity needs two p x k bases of the same shape");
  }
  const Index k = gamma.cols();
  const MatrixXd I = MatrixXd::Identity(k, k);
  if ((gamma_hat.transpose() * gamma_hat - I).cwiseAbs().maxCoeff() > 1e-8 ||
      (gamma.transpose() * gamma - I).cwiseAbs().maxCoeff() > 1e-8) {
    throw DomainError("similarity needs column-orthonormal bases");
  }
  const VectorXd s = Eigen::JacobiSVD<MatrixXd>(gamma_hat.transpose() * gamma).singularValues();
  return s.cwiseMax(0.0).cwiseMin(1.0).mean();
}

enum class RadialKind { Gaussian, StudentT };

/// Density generator psi of an elliptical law in R^p, rescaled to the unit
/// determinant shape: psi_s(u) = sigma^{-p/2} psi(u / sigma).
struct RadialSpec {
  RadialKind kind = RadialKind::Gaussian;
  int p = 1;
  double nu = 0.0;     // degrees of freedom for StudentT
  double sigma = 1.0;  // |V_0|^{1/p}

  static RadialSpec gaussian(int p, double sigma = 1.0) { return {RadialKind::Gaussian, p, 0.0, sigma}; }
  static RadialSpec student_t(int p, double nu, double sigma = 1.0) {
    return {RadialKind::StudentT, p, nu, sigma};
  }

  void validate() const {
    if (p < 1) throw DomainError("radial dimension must be positive");
    if (!(sigma > 0.0)) throw DomainError("radial scale must be positive");
    if (kind == RadialKind::StudentT && !(nu > 0.0)) throw DomainError("t degrees of freedom must be positive");
  }

  double log_psi_unscaled(double u) const {
    const double pd = p;
    if (kind == RadialKind::Gaussian) {
      return -0.5 * pd * std::log(2.0 * boost::math::constants::pi<double>()) - 0.5 * u;
    }
    return std::lgamma(0.5 * (nu + pd)) - std::lgamma(0.5 * nu) -
           0.5 * pd * std::log(nu * boost::math::constants::pi<double>()) -
           0.5 * (nu + pd) * std::log1p(u / nu);
  }

  /// d/du log psi(u), unscaled.
  double dlog_psi_unscaled(double u) const {
    if (kind == RadialKind::Gaussian) return -0.5;
    return -0.5 * (nu + p) / (nu + u);
  }

  double psi(double u) const {
    return std::exp(-0.5 * p * std::log(sigma) + log_psi_unscaled(u / sigma));
  }

  double dpsi(double u) const { return psi(u) * dlog_psi_unscaled(u / sigma) / sigma; }
};

/// int_{R^p} g(y'y) dy = S_{p-1} int_0^inf r^{p-1} g(r^2) dr, adaptive
/// Gauss-Kronrod on [0, r_split] and [r_split, inf).
template <typename G>
double radial_integral(int p, G&& g, double r_split, double rel_tol = 1e-10) {
  using boost::math::quadrature::gauss_kronrod;
  const double pd = p;
  const double log_surface = std::log(2.0) + 0.5 * pd * std::log(boost::math::constants::pi<double>()) -
                             std::lgamma(0.5 * pd);
  auto f = [&](double r) {
    if (r <= 0.0) return p == 1 ? g(0.0) : 0.0;
    return std::pow(r, pd - 1.0) * g(r * r);
  };
  double err1 = 0.0, err2 = 0.0;
  const double inner = gauss_kronrod<double, 61>::integrate(f, 0.0, r_split, 20, rel_tol, &err1);
  const double outer = gauss_kronrod<double, 61>::integrate(f, r_split, std::numeric_limits<double>::infinity(),
                                                            20, rel_tol, &err2);
  const double total = inner + outer;
  const double err = err1 + err2;
  if (!std::isfinite(total) || !(err <= 1e-6 * std::abs(total) + 1e-300)) {
    throw DivergentIntegral("radial integral did not converge (estimate " + std::to_string(total) +
                            ", error " + std::to_string(err) + ")");
  }
  return std::exp(log_surface) * total;
}

struct AsymptoticConstants {
  double eta_s = 0.0;
  double phi_s = 0.0;
  double xi_s = 0.0;
};

/// Raw defining integrals, before the sign calibration.
struct RadialIntegrals {
  double eta_integral = 0.0;  // int (y'y) w psi_s' dy
  double phi_integral = 0.0;  // int (y'y)^2 w psi_s' dy
  double xi_integral = 0.0;   // int (y'y)^2 w^2 psi_s dy
};

inline RadialIntegrals radial_integrals(const RadialSpec& radial, const WeightSpec& spec) {
  radial.validate();
  spec.validate();
  // Split where the weight jumps; for the unit weight split at the mode of
  // r^{p+3} psi_s(r^2) scale so both halves carry mass.
  const double r_split = spec.kind == WeightKind::Unit
                             ? std::sqrt(radial.sigma * (radial.p + 4.0))
                             : std::sqrt(spec.cutoff());
  RadialIntegrals out;
  out.eta_integral = radial_integral(radial.p, [&](double u) { return u * weight(u, spec) * radial.dpsi(u); }, r_split);
  out.phi_integral = radial_integral(radial.p, [&](double u) { return u * u * weight(u, spec) * radial.dpsi(u); }, r_split);
  out.xi_integral = radial_integral(radial.p, [&](double u) {
    const double w = weight(u, spec);
    return u * u * w * w * radial.psi(u);
  }, r_split);
  return out;
}

/// eta_s, phi_s as absolute values of the inverted defining integrals (the
/// literal integrals are negative for decreasing psi), and xi_s.
inline AsymptoticConstants asymptotic_constants(const RadialSpec& radial, const WeightSpec& spec) {
  const RadialIntegrals I = radial_integrals(radial, spec);
  const double p = radial.p;
  AsymptoticConstants c;
  c.eta_s = std::abs(1.0 / ((2.0 / p) * I.eta_integral));
  c.phi_s = std::abs(1.0 / ((2.0 / (p * (p + 2.0))) * I.phi_integral));
  c.xi_s = c.phi_s * c.phi_s / (p * (p + 2.0)) * I.xi_integral;
  if (!std::isfinite(c.eta_s) || !std::isfinite(c.phi_s) || !std::isfinite(c.xi_s)) {
    throw DivergentIntegral("asymptotic constants are not finite");
  }
  return c;
}

/// Population location mu_0 and scatter V_0, with the unit-determinant
/// shape V_s0 = V_0 / |V_0|^{1/p} and its eigenpairs (descending).
struct EllipticalModel {
  VectorXd mu;
  MatrixXd shape;
  double scale = 1.0;  // |V_0|^{1/p}
  VectorXd eigenvalues;
  MatrixXd eigenvectors;

  static EllipticalModel from_scatter(const VectorXd& mu, const MatrixXd& V0) {
    const Index p = mu.size();
    if (V0.rows() != p || V0.cols() != p) throw DimensionMismatch("model scatter must be p x p");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(V0);
    if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0)) {
      throw SingularScatter("model scatter must be positive definite");
    }
    EllipticalModel m;
    m.mu = mu;
    m.scale = std::exp(es.eigenvalues().array().log().mean());
    m.eigenvalues = es.eigenvalues().reverse() / m.scale;
    m.eigenvectors = es.eigenvectors().rowwise().reverse();
    m.shape = m.eigenvectors * m.eigenvalues.asDiagonal() * m.eigenvectors.transpose();
    return m;
  }

  Index p() const { return mu.size(); }

  double distance(const Eigen::Ref<const VectorXd>& x) const {
    const VectorXd c = eigenvectors.transpose() * (x - mu);
    return c.cwiseAbs2().cwiseQuotient(eigenvalues).sum();
  }
};

namespace detail {

inline constexpr double kRepeatedEigenvalueTol = 1e-10;

inline void require_simple(const EllipticalModel& m, Index j) {
  if (j < 0 || j >= m.p()) throw DomainError("eigen index out of range");
  const double scale = std::max(1.0, m.eigenvalues.cwiseAbs().maxCoeff());
  for (Index k = 0; k < m.p(); ++k) {
    if (k != j && std::abs(m.eigenvalues[k] - m.eigenvalues[j]) <= kRepeatedEigenvalueTol * scale) {
      throw DegenerateSpectrum("eigenvalue " + std::to_string(j) + " is repeated");
    }
  }
}

// (lambda_j I - V_s0)^+ applied to z.
inline VectorXd gap_pinv_apply(const EllipticalModel& m, Index j, const VectorXd& z) {
  VectorXd c = m.eigenvectors.transpose() * z;
  for (Index k = 0; k < m.p(); ++k) {
    c[k] = k == j ? 0.0 : c[k] / (m.eigenvalues[j] - m.eigenvalues[k]);
  }
  return m.eigenvectors * c;
}

}  // namespace detail

/// IF of the location: eta_s w(d(x)) (x - mu_0).
inline VectorXd if_location(const VectorXd& x, const EllipticalModel& model, const AsymptoticConstants& c,
                            const WeightSpec& spec) {
  if (x.size() != model.p()) throw DimensionMismatch("probe dimension does not match model");
  return c.eta_s * weight(model.distance(x), spec) * (x - model.mu);
}

/// IF of lambda_sj / lambda_si (0-based indices, eigenvalues descending).
inline double if_eigenvalue_ratio(const VectorXd& x, Index i, Index j, const EllipticalModel& model,
                                  const AsymptoticConstants& c, const WeightSpec& spec) {
  if (x.size() != model.p()) throw DimensionMismatch("probe dimension does not match model");
  if (i == j) throw DomainError("eigenvalue ratio needs i != j");
  detail::require_simple(model, i);
  detail::require_simple(model, j);
  const VectorXd z = x - model.mu;
  const double li = model.eigenvalues[i], lj = model.eigenvalues[j];
  const double gi = model.eigenvectors.col(i).dot(z), gj = model.eigenvectors.col(j).dot(z);
  return c.phi_s * weight(model.distance(x), spec) * (lj / li) * (gj * gj / lj - gi * gi / li);
}

/// IF of the j-th eigenvector: phi_s w(d) (gamma_j'z) (lambda_sj I - V_s0)^+ z.
inline VectorXd if_eigenvector(const VectorXd& x, Index j, const EllipticalModel& model,
                               const AsymptoticConstants& c, const WeightSpec& spec) {
  if (x.size() != model.p()) throw DimensionMismatch("probe dimension does not match model");
  detail::require_simple(model, j);
  const VectorXd z = x - model.mu;
  const double w = weight(model.distance(x), spec);
  if (w == 0.0) return VectorXd::Zero(model.p());
  return c.phi_s * w * model.eigenvectors.col(j).dot(z) * detail::gap_pinv_apply(model, j, z);
}

/// C with |IF_gamma_j(x)| <= C h(d(x)): phi_s lambda_max / min_k |lambda_j - lambda_k|.
inline double if_eigenvector_bound(Index j, const EllipticalModel& model, const AsymptoticConstants& c) {
  detail::require_simple(model, j);
  double gap = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < model.p(); ++k) {
    if (k != j) gap = std::min(gap, std::abs(model.eigenvalues[j] - model.eigenvalues[k]));
  }
  return c.phi_s * model.eigenvalues.maxCoeff() / gap;
}

/// C with |IF_lambda_ij(x)| <= C h(d(x)): phi_s lambda_sj / lambda_si.
inline double if_eigenvalue_ratio_bound(Index i, Index j, const EllipticalModel& model,
                                        const AsymptoticConstants& c) {
  return c.phi_s * model.eigenvalues[j] / model.eigenvalues[i];
}

/// Asymptotic covariance of sqrt(n)(gamma_hat_j - gamma_j):
/// xi_s lambda_j V_0 (lambda_j I - V_0)^{+2}. Invariant to the scale of V_0.
inline MatrixXd asymptotic_variance_eigenvector(Index j, const EllipticalModel& model,
                                                const AsymptoticConstants& c) {
  detail::require_simple(model, j);
  VectorXd d(model.p());
  const double lj = model.eigenvalues[j];
  for (Index k = 0; k < model.p(); ++k) {
    const double lk = model.eigenvalues[k];
    d[k] = k == j ? 0.0 : lj * lk / ((lj - lk) * (lj - lk));
  }
  return c.xi_s * model.eigenvectors * d.asDiagonal() * model.eigenvectors.transpose();
}

/// Asymptotic variance of sqrt(n)(lambda_hat_sij - lambda_ij): 4 xi_s lambda_ij^2,
/// lambda_ij = lambda_j / lambda_i.
inline double asymptotic_variance_eigenvalue_ratio(Index i, Index j, const EllipticalModel& model,
                                                   const AsymptoticConstants& c) {
  if (i == j) throw DomainError("eigenvalue ratio needs i != j");
  detail::require_simple(model, i);
  detail::require_simple(model, j);
  const double r = model.eigenvalues[j] / model.eigenvalues[i];
  return 4.0 * c.xi_s * r * r;
}

}  // namespace sppca
