#include <cmath>

#include <gtest/gtest.h>

#include "sppca/influence.hpp"
#include "sppca/metrics.hpp"
#include "sppca/simgen.hpp"

using namespace sppca;

namespace {

double rel_err(const VectorXd& a, const VectorXd& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST(EmpiricalInfluence, CenterGivesNearZero) {
  const DataSet ref(quasi_gaussian_sample(20000, VectorXd::Zero(2), MatrixXd::Identity(2, 2)));
  const EmpiricalInfluence emp(ref, WeightSpec{});
  const auto all = emp.perturb_both(emp.base().mu, 1e-3);
  for (const Functional& f : {Functional::location(), Functional::eigenvector(0), Functional::eigen_ratio(0, 1)}) {
    EXPECT_LE(emp.quotient(all, f).value.norm(), 1e-3);
  }
}

TEST(EmpiricalInfluence, LocationMatchesClosedForm) {
  const Index p = 2;
  const DataSet ref(quasi_gaussian_sample(50000, VectorXd::Zero(p), MatrixXd::Identity(p, p)));
  const WeightSpec spec;
  const EmpiricalInfluence emp(ref, spec);
  const EllipticalModel model = EllipticalModel::from_scatter(VectorXd::Zero(p), MatrixXd::Identity(p, p));
  const AsymptoticConstants c = asymptotic_constants(RadialSpec::gaussian(2), spec);
  const VectorXd x = Eigen::Vector2d(1.0, 0.0);
  const EmpiricalIF e = emp(Functional::location(), x, 1e-3);
  EXPECT_LE(rel_err(e.value, if_location(x, model, c, spec)), 0.1);
  EXPECT_LE(e.discrepancy, 0.05);
}

TEST(EmpiricalInfluence, RatioMatchesClosedForm) {
  // Shape diag(3,2,1)/6^{1/3} at reference scale 0.2: the ball holds nearly
  // all the mass and eps = 1e-3 is in the first-order regime.
  const double sigma = 0.2;
  Eigen::Vector3d lam(3, 2, 1);
  const MatrixXd V = sigma * MatrixXd(lam.asDiagonal()) / std::cbrt(6.0);
  const DataSet ref(quasi_gaussian_sample(50000, VectorXd::Zero(3), V));
  const WeightSpec spec;
  const EmpiricalInfluence emp(ref, spec);
  const EllipticalModel model = EllipticalModel::from_scatter(VectorXd::Zero(3), V);
  const AsymptoticConstants c = asymptotic_constants(RadialSpec::gaussian(3, sigma), spec);
  const VectorXd x = std::sqrt(sigma) * Eigen::Vector3d(1.0, 1.0, 0.0);
  const auto all = emp.perturb_both(x, 1e-3);
  const EmpiricalIF e = emp.quotient(all, Functional::eigen_ratio(0, 1));
  const double cf = if_eigenvalue_ratio(x, 0, 1, model, c, spec);
  EXPECT_LE(std::abs(e.value[0] - cf) / std::abs(cf), 0.1);
  EXPECT_LE(e.discrepancy, 0.05);
  const EmpiricalIF g = emp.quotient(all, Functional::eigenvector(0));
  EXPECT_LE(rel_err(g.value, if_eigenvector(x, 0, model, c, spec)), 0.1);
}

TEST(EmpiricalInfluence, OutsideBallIsZero) {
  // Distances use the unit-determinant shape diag(2, 0.5): d(x) = 4.5.
  const MatrixXd V = 0.2 * MatrixXd(Eigen::Vector2d(2.0, 0.5).asDiagonal());
  const DataSet ref(quasi_gaussian_sample(20000, VectorXd::Zero(2), V));
  const EmpiricalInfluence emp(ref, WeightSpec{});
  const auto all = emp.perturb_both(Eigen::Vector2d(3.0, 0.0), 1e-3);
  for (const Functional& f : {Functional::location(), Functional::eigenvector(1), Functional::eigen_ratio(0, 1)}) {
    EXPECT_LE(emp.quotient(all, f).value.cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(EmpiricalInfluence, Validation) {
  const DataSet ref(quasi_gaussian_sample(2000, VectorXd::Zero(2), MatrixXd::Identity(2, 2)));
  const EmpiricalInfluence emp(ref, WeightSpec{});
  EXPECT_THROW(emp.perturbed(Eigen::Vector2d(0.1, 0.1), 0.0), DomainError);
  EXPECT_THROW(emp.perturbed(Eigen::Vector2d(0.1, 0.1), 0.02), DomainError);
  EXPECT_THROW(emp.perturbed(Eigen::Vector3d(0.1, 0.1, 0.1), 1e-3), DimensionMismatch);
  EXPECT_THROW(emp(Functional::eigen_ratio(1, 1), Eigen::Vector2d(0.1, 0.1)), DomainError);
  EXPECT_THROW(emp(Functional::eigenvector(2), Eigen::Vector2d(0.1, 0.1)), DomainError);
  VectorXd w = VectorXd::Constant(2000, 1.0 / 2000);
  w[0] *= 2.0;
  w /= w.sum();
  EXPECT_THROW(EmpiricalInfluence(DataSet(ref.X, w), WeightSpec{}), DomainError);
}

TEST(EmpiricalInfluence, OneShotMatchesClass) {
  const DataSet ref(quasi_gaussian_sample(5000, VectorXd::Zero(2), MatrixXd::Identity(2, 2)));
  const VectorXd x = Eigen::Vector2d(0.5, -0.8);
  const EmpiricalIF a = empirical_if(Functional::eigenvector(0), x, ref, 1e-3, WeightSpec{});
  const EmpiricalIF b = EmpiricalInfluence(ref, WeightSpec{})(Functional::eigenvector(0), x, 1e-3);
  EXPECT_EQ(a.value, b.value);
}
