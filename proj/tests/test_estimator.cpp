#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "sppca/estimator.hpp"
#include "sppca/metrics.hpp"
#include "sppca/pca.hpp"
#include "sppca/simgen.hpp"

using namespace sppca;

namespace {

MatrixXd cross_data() {
  MatrixXd X(4, 2);
  X << 1, 0, -1, 0, 0, 1, 0, -1;
  return X;
}

DataSet gaussian(Index n, const VectorXd& diag, std::uint64_t seed) {
  Rng rng(seed);
  return DataSet(sample_mvt(1e300, VectorXd::Zero(diag.size()), diag.asDiagonal(), n, rng));
}

VectorXd diag5() {
  VectorXd d(5);
  d << 4, 2, 1, 1, 1;
  return d;
}

double log_det(const MatrixXd& V) { return detail::log_det_spd(V); }

}  // namespace

TEST(FixedPointStep, CrossDataIsFixedPoint) {
  const DataSet data(cross_data());
  const LocationScatter cur{VectorXd::Zero(2), MatrixXd::Identity(2, 2), false};
  const LocationScatter next = fixed_point_step(data, cur, WeightSpec{});
  EXPECT_NEAR(next.mu.norm(), 0.0, 1e-15);
  EXPECT_NEAR((next.V - MatrixXd::Identity(2, 2)).norm(), 0.0, 1e-14);
}

TEST(FixedPointStep, MatchesHandComputedUpdate) {
  Rng rng(3);
  const DataSet data(sample_mvt(5.0, VectorXd::Zero(3), MatrixXd::Identity(3, 3), 40, rng));
  const LocationScatter cur{VectorXd::Constant(3, 0.1), 2.0 * MatrixXd::Identity(3, 3), false};
  const WeightSpec spec;
  VectorXd num = VectorXd::Zero(3);
  MatrixXd S = MatrixXd::Zero(3, 3);
  double sw = 0.0, swd = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const VectorXd z = data.X.row(i).transpose() - cur.mu;
    const double d = z.squaredNorm() / 2.0;
    const double w = data.obs_weights[i] * (std::exp(-d) > spec.alpha ? std::exp(-d) : 0.0);
    num += w * data.X.row(i).transpose();
    S += w * z * z.transpose();
    sw += w;
    swd += w * d;
  }
  const LocationScatter next = fixed_point_step(data, cur, spec);
  EXPECT_LT((next.mu - num / sw).norm(), 1e-13);
  EXPECT_LT((next.V - 3.0 * S / swd).norm(), 1e-12);
}

TEST(FixedPointStep, EmptyActiveSet) {
  MatrixXd X(3, 2);
  X << 10, 0, -10, 0, 0, 10;
  const LocationScatter cur{VectorXd::Zero(2), MatrixXd::Identity(2, 2), false};
  EXPECT_THROW(fixed_point_step(DataSet(X), cur, WeightSpec{}), EmptyActiveSet);
  try {
    fit_sppca(DataSet(X), 1.0, cur, WeightSpec{});
    FAIL();
  } catch (const EmptyActiveSet& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos);
  }
}

TEST(FixedPointStep, DegenerateStep) {
  MatrixXd X(3, 2);
  X << 0, 0, 0, 0, 10, 10;
  const LocationScatter cur{VectorXd::Zero(2), MatrixXd::Identity(2, 2), false};
  EXPECT_THROW(fixed_point_step(DataSet(X), cur, WeightSpec{}), DegenerateStep);
}

TEST(FixedPointStep, ConvergesFromInitialEstimate) {
  VectorXd d(3);
  d << 3, 2, 1;
  const DataSet data = gaussian(1000, d, 21);
  LocationScatter ls = initial_estimate(data);
  ls.diag_approx = false;
  bool converged = false;
  for (int it = 0; it < 500 && !converged; ++it) {
    const LocationScatter next = fixed_point_step(data, ls, WeightSpec{});
    converged = detail::relative_change(ls, next) <= 1e-8;
    ls = next;
  }
  EXPECT_TRUE(converged);
}

TEST(FitSppca, CrossDataOneIteration) {
  const LocationScatter init{VectorXd::Zero(2), MatrixXd::Identity(2, 2), false};
  const FitResult fit = fit_sppca(DataSet(cross_data()), 1.0, init, WeightSpec{});
  EXPECT_TRUE(fit.converged);
  EXPECT_EQ(fit.iterations, 1);
  EXPECT_DOUBLE_EQ(fit.active_ratio, 1.0);
  EXPECT_NEAR((fit.ls.V - MatrixXd::Identity(2, 2)).norm(), 0.0, 1e-14);
}

TEST(FitSppca, RecoversLeadingDirection) {
  const DataSet data = gaussian(2000, diag5(), 22);
  for (bool diag : {true, false}) {
    const FitResult fit =
        fit_sppca(data, 5.0, scaled_init(initial_estimate(data), 5.0), WeightSpec{}, FitOptions{1e-8, 500, diag});
    ASSERT_TRUE(fit.converged);
    const double cos_fit = std::abs(pca(fit.ls.V, 1).eigenvectors(0, 0));
    EXPECT_GE(cos_fit, 0.97);
    // Sample covariance on the same draw as a reference.
    const MatrixXd Z = data.X.rowwise() - data.X.colwise().mean();
    const double cos_cov = std::abs(pca(MatrixXd(Z.transpose() * Z / 1999.0), 1).eigenvectors(0, 0));
    EXPECT_GE(cos_fit, cos_cov - 0.02);
  }
}

TEST(FitSppca, ScaleLaw) {
  const DataSet data = gaussian(500, diag5(), 23);
  const LocationScatter base = initial_estimate(data);
  for (bool diag : {true, false}) {
    for (double a : {2.5, 5.0, 10.0}) {
      const FitResult fit = fit_sppca(data, a, scaled_init(base, a), WeightSpec{}, FitOptions{1e-8, 500, diag});
      ASSERT_TRUE(fit.converged);
      const double r = std::exp((log_det(fit.ls.V) - log_det(base.V)) / 5.0) / a;
      EXPECT_GT(r, 0.0);
      EXPECT_LT(r, 1.0);
    }
  }
}

TEST(FitSppca, InvariantsAtConvergence) {
  const DataSet data = gaussian(800, diag5(), 24);
  for (bool diag : {true, false}) {
    const FitOptions opts{1e-10, 1000, diag};
    const FitResult fit = fit_sppca(data, 4.0, scaled_init(initial_estimate(data), 4.0), WeightSpec{}, opts);
    ASSERT_TRUE(fit.converged);
    EXPECT_LE(fit.residual, opts.tol);
    const double frac = static_cast<double>(std::count(fit.active_mask.begin(), fit.active_mask.end(), true)) / 800.0;
    EXPECT_NEAR(fit.active_ratio, frac, 1e-12);
    EXPECT_LE(estimating_equation_residual(data, fit.ls, WeightSpec{}).max(), 10 * opts.tol);
  }
}

TEST(FitSppca, NonConvergenceIsFlagged) {
  const DataSet data = gaussian(300, diag5(), 25);
  const FitResult fit = fit_sppca(data, 5.0, scaled_init(initial_estimate(data), 5.0), WeightSpec{}, FitOptions{1e-14, 2, true});
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.iterations, 2);
  EXPECT_EQ(fit.active_mask.size(), 300u);
}

TEST(FitSppca, PermutationEquivariance) {
  const DataSet data = gaussian(400, diag5(), 26);
  std::vector<int> perm{3, 0, 4, 1, 2};
  MatrixXd Xp(data.n(), 5);
  for (int j = 0; j < 5; ++j) Xp.col(j) = data.X.col(perm[j]);
  const DataSet dp(Xp);
  for (bool diag : {true, false}) {
    const FitOptions opts{1e-10, 1000, diag};
    const FitResult f = fit_sppca(data, 5.0, scaled_init(initial_estimate(data), 5.0), WeightSpec{}, opts);
    const FitResult g = fit_sppca(dp, 5.0, scaled_init(initial_estimate(dp), 5.0), WeightSpec{}, opts);
    for (int j = 0; j < 5; ++j) {
      EXPECT_NEAR(g.ls.mu[j], f.ls.mu[perm[j]], 1e-9);
      for (int k = 0; k < 5; ++k) EXPECT_NEAR(g.ls.V(j, k), f.ls.V(perm[j], perm[k]), 1e-9);
    }
  }
}

TEST(FitSppca, CollapsedDiagonalFitIsRejected) {
  // Few active points in high dimension: the diagonal metric still iterates,
  // but the fitted scatter is rank deficient.
  Rng rng(27);
  const DataSet data(sample_mvt(1e300, VectorXd::Zero(50), MatrixXd::Identity(50, 50), 250, rng));
  const std::vector<double> grid{12.0, 100.0};
  const auto fits = solution_set(data, grid, WeightSpec{}, FitOptions{1e-8, 500, true});
  ASSERT_TRUE(fits[0].failure.has_value());
  EXPECT_NE(fits[0].failure->find("SingularScatter"), std::string::npos);
  EXPECT_FALSE(fits[1].failure.has_value());
}

TEST(SolutionSet, SingletonMatchesFit) {
  const DataSet data = gaussian(300, diag5(), 28);
  const auto set = solution_set(data, {4.0}, WeightSpec{});
  const FitResult fit = fit_sppca(data, 4.0, scaled_init(initial_estimate(data), 4.0), WeightSpec{});
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ((set[0].ls.V - fit.ls.V).norm(), 0.0);
  EXPECT_EQ(set[0].iterations, fit.iterations);
}

TEST(SolutionSet, GridValidation) {
  const DataSet data = gaussian(50, diag5(), 29);
  EXPECT_THROW(solution_set(data, {}, WeightSpec{}), DomainError);
  EXPECT_THROW(solution_set(data, {2.0, 1.0}, WeightSpec{}), DomainError);
  EXPECT_THROW(solution_set(data, {0.0, 1.0}, WeightSpec{}), DomainError);
}

TEST(SolutionSet, ShapeAgreementAndMonotoneAR) {
  const Index n = 4000;
  const DataSet data = gaussian(n, diag5(), 30);
  std::vector<double> grid;
  for (int j = 0; j < 12; ++j) grid.push_back(1.0 + 1.25 * j);
  const FitOptions opts{1e-10, 2000, false};
  const auto fits = solution_set(data, grid, WeightSpec{}, opts);
  std::vector<const FitResult*> mid;
  for (std::size_t j = 1; j < fits.size(); ++j) {
    ASSERT_TRUE(fits[j].converged);
    EXPECT_GE(fits[j].active_ratio, fits[j - 1].active_ratio - 2.0 / n);
  }
  for (const auto& f : fits) {
    if (f.active_ratio >= 0.5) mid.push_back(&f);
  }
  ASSERT_GE(mid.size(), 3u);
  auto unit = [](const MatrixXd& V) { return MatrixXd(V / std::exp(log_det(V) / 5.0)); };
  const double dist = (unit(mid[0]->ls.V) - unit(mid[mid.size() / 2]->ls.V)).norm();
  EXPECT_LE(dist, 5.0 * 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(SolutionSet, DeterministicAcrossThreads) {
  const DataSet data = gaussian(300, diag5(), 31);
  const std::vector<double> grid{1.0, 2.0, 4.0, 8.0, 16.0};
  const auto a = solution_set(data, grid, WeightSpec{}, {}, 1);
  const auto b = solution_set(data, grid, WeightSpec{}, {}, 3);
  for (std::size_t j = 0; j < grid.size(); ++j) EXPECT_EQ((a[j].ls.V - b[j].ls.V).norm(), 0.0);
}

TEST(FitUnitDeterminant, RecoversShape) {
  // At this data scale the |V| = 1 ball holds almost every point.
  const DataSet data = gaussian(2000, 0.05 * diag5(), 32);
  LocationScatter init = initial_estimate(data);
  init.V /= std::exp(log_det(init.V) / 5.0);
  const FitResult fit = fit_unit_determinant(data, init, WeightSpec{}, FitOptions{1e-10, 1000, false});
  ASSERT_TRUE(fit.converged);
  EXPECT_GT(fit.active_ratio, 0.9);
  EXPECT_NEAR(log_det(fit.ls.V), 0.0, 1e-9);
  const MatrixXd shape = MatrixXd(diag5().asDiagonal()) / std::pow(8.0, 0.2);
  EXPECT_LT((fit.ls.V - shape).norm() / shape.norm(), 0.1);
}

TEST(Tme, CrossDataIdentity) {
  const TmeResult t = fit_tme(DataSet(cross_data()), VectorXd::Zero(2), FitOptions{1e-12, 500, false});
  EXPECT_TRUE(t.converged);
  EXPECT_NEAR((t.ls.V - MatrixXd::Identity(2, 2)).norm(), 0.0, 1e-12);
}

TEST(Tme, ScaleInvariance) {
  const DataSet data = gaussian(500, diag5(), 33);
  const FitOptions opts{1e-12, 2000, false};
  const TmeResult base = fit_tme(data, VectorXd::Zero(5), opts);
  for (double c : {0.1, 5.0, 10.0}) {
    const TmeResult t = fit_tme(DataSet(MatrixXd(c * data.X)), VectorXd::Zero(5), opts);
    EXPECT_LE((t.ls.V - base.ls.V).norm() / base.ls.V.norm(), 1e-8) << c;
  }
}

TEST(Tme, TraceAndRecovery) {
  const DataSet data = gaussian(2000, diag5(), 34);
  const TmeResult t = fit_tme(data, VectorXd::Zero(5), FitOptions{1e-10, 2000, false});
  ASSERT_TRUE(t.converged);
  EXPECT_NEAR(t.ls.V.trace(), 5.0, 1e-10);
  EXPECT_GE(similarity_rho(pca(t.ls.V, 1).eigenvectors, MatrixXd::Identity(5, 1)), 0.97);
}

TEST(Tme, ZeroDistancePointDropped) {
  MatrixXd X = cross_data();
  X.conservativeResize(5, 2);
  X.row(4).setZero();
  const TmeResult t = fit_tme(DataSet(X), VectorXd::Zero(2), FitOptions{1e-12, 500, false});
  EXPECT_EQ(t.zero_distance_points, 1);
  EXPECT_NEAR((t.ls.V - MatrixXd::Identity(2, 2)).norm(), 0.0, 1e-12);
}

TEST(Regularized, TauZeroMatchesFit) {
  const DataSet data = gaussian(300, diag5(), 35);
  const FitResult r = fit_regularized(data, 5.0, 0.0, WeightSpec{});
  const FitResult f = fit_sppca(data, 5.0, scaled_init(initial_estimate(data), 5.0), WeightSpec{});
  EXPECT_EQ((r.ls.V - f.ls.V).norm(), 0.0);
  EXPECT_EQ(r.iterations, f.iterations);
}

TEST(Regularized, LargeTauGivesIdentity) {
  const DataSet data = gaussian(300, diag5(), 36);
  const FitResult r = fit_regularized(data, 5.0, 1e6, WeightSpec{});
  EXPECT_LT((r.ls.V - MatrixXd::Identity(5, 5)).norm(), 1e-4);
  EXPECT_THROW(fit_regularized(data, 5.0, -1.0, WeightSpec{}), DomainError);
}

TEST(Regularized, HighDimensionalFullMetric) {
  // The shrinkage target is I_p in absolute units and any fixed point has
  // tr(V^{-1}) = p, so the data are put on a matching scale.
  Rng rng(37);
  const MatrixXd V0 = MatrixXd::Identity(40, 40) / 40.0;
  const DataSet data(sample_mvt(1e300, VectorXd::Zero(40), V0, 30, rng));
  const FitOptions opts{1e-8, 2000, false};
  EXPECT_THROW(fit_regularized(data, 40.0, 0.0, WeightSpec{}, opts), SingularScatter);
  const FitResult r = fit_regularized(data, 40.0, 1.0, WeightSpec{}, opts);
  ASSERT_TRUE(r.converged);
  EXPECT_GT(r.active_ratio, 0.0);
  EXPECT_NEAR(r.ls.V.inverse().trace(), 40.0, 1e-5);
}

TEST(Pca, Examples) {
  const PCAModel id = pca(MatrixXd::Identity(3, 3), 3);
  EXPECT_TRUE(id.eigenvalues.isApprox(VectorXd::Ones(3)));
  EXPECT_LT((id.eigenvectors.transpose() * id.eigenvectors - MatrixXd::Identity(3, 3)).norm(), 1e-12);
  Eigen::Vector3d d(4, 2, 1);
  const PCAModel m = pca(MatrixXd(d.asDiagonal()), 2);
  EXPECT_NEAR(m.eigenvalues[0], 4.0, 1e-14);
  EXPECT_NEAR(m.eigenvalues[1], 2.0, 1e-14);
  EXPECT_LT((m.eigenvectors - MatrixXd::Identity(3, 2)).norm(), 1e-14);
  EXPECT_THROW(pca(MatrixXd::Identity(3, 3), 0), DomainError);
  EXPECT_THROW(pca(MatrixXd::Identity(3, 3), 4), DomainError);
}

TEST(Pca, ReconstructionAndSigns) {
  Rng rng(38);
  for (int t = 0; t < 20; ++t) {
    const MatrixXd A = MatrixXd::Random(6, 6);
    const MatrixXd V = A * A.transpose() + MatrixXd::Identity(6, 6);
    const PCAModel m = pca(V, 6);
    MatrixXd R = m.eigenvectors * m.eigenvalues.asDiagonal() * m.eigenvectors.transpose();
    EXPECT_LT((R - V).norm(), 1e-10);
    for (Index j = 0; j < 6; ++j) {
      Index arg;
      m.eigenvectors.col(j).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(m.eigenvectors(arg, j), 0.0);
      if (j > 0) {
        EXPECT_GE(m.eigenvalues[j - 1], m.eigenvalues[j]);
      }
    }
  }
}
