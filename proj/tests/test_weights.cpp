#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sppca/mahalanobis.hpp"
#include "sppca/weights.hpp"

using namespace sppca;

TEST(Weight, Examples) {
  const WeightSpec spec;
  EXPECT_DOUBLE_EQ(weight(0.0, spec), 1.0);
  EXPECT_NEAR(weight(std::log(2.0), spec), 0.5, 1e-15);
  EXPECT_EQ(weight(std::log(1.0 / 0.05), spec), 0.0);
}

TEST(Weight, NegativeArgumentThrows) {
  EXPECT_THROW(weight(-1e-300, WeightSpec{}), DomainError);
  EXPECT_THROW(h(-1.0, WeightSpec{}), DomainError);
}

TEST(Weight, InvalidAlphaThrows) {
  EXPECT_THROW((WeightSpec{0.0}).validate(), DomainError);
  EXPECT_THROW((WeightSpec{1.0}).validate(), DomainError);
}

TEST(Weight, UnitKindIsOne) {
  const WeightSpec unit{0.05, WeightKind::Unit};
  for (double u : {0.0, 1.0, 5.0, 100.0}) EXPECT_EQ(weight(u, unit), 1.0);
}

TEST(Weight, NonIncreasingAndRange) {
  const WeightSpec spec;
  double prev = weight(0.0, spec);
  for (int i = 1; i <= 60000; ++i) {
    const double u = 1e-4 * i;
    const double w = weight(u, spec);
    EXPECT_LE(w, prev);
    EXPECT_TRUE(w == 0.0 || (w > spec.alpha && w <= 1.0)) << u;
    prev = w;
  }
}

TEST(H, Examples) {
  const WeightSpec spec;
  EXPECT_EQ(h(0.0, spec), 0.0);
  EXPECT_NEAR(h(1.0, spec), 0.36787944117144233, 1e-15);
}

TEST(H, GridSupremumAtOne) {
  const WeightSpec spec;
  double best = -1.0, arg = -1.0;
  for (int i = 0; i <= 100000; ++i) {
    const double u = 1e-4 * i;
    const double v = h(u, spec);
    if (v > best) {
      best = v;
      arg = u;
    }
    if (u >= spec.cutoff()) {
      EXPECT_EQ(v, 0.0);
    }
  }
  EXPECT_NEAR(best, std::exp(-1.0), 1e-12);
  EXPECT_NEAR(arg, 1.0, 1e-12);
}

TEST(InBall, Examples) {
  LocationScatter ls{VectorXd::Constant(2, 0.5), MatrixXd::Identity(2, 2), false};
  const WeightSpec spec;
  EXPECT_TRUE(in_ball(ls.mu, ls, spec));
  EXPECT_FALSE(in_ball(ls.mu + Eigen::Vector2d(2.0, 0.0), ls, spec));
  EXPECT_THROW(in_ball(VectorXd::Zero(3), ls, spec), DimensionMismatch);
}

TEST(InBall, AgreesWithWeightPositivity) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> alpha(0.01, 0.5);
  const Index p = 3;
  for (int t = 0; t < 100000; ++t) {
    LocationScatter ls;
    ls.mu = VectorXd::NullaryExpr(p, [&] { return z(rng); });
    MatrixXd A = MatrixXd::NullaryExpr(p, p, [&] { return z(rng); });
    ls.V = A * A.transpose() + 0.1 * MatrixXd::Identity(p, p);
    ls.diag_approx = t % 2 == 0;
    const WeightSpec spec{alpha(rng)};
    const VectorXd x = ls.mu + 2.0 * VectorXd::NullaryExpr(p, [&] { return z(rng); });
    ASSERT_EQ(in_ball(x, ls, spec), weight(mahalanobis(x, ls), spec) > 0.0);
  }
}

TEST(Mahalanobis, Examples) {
  LocationScatter ls{Eigen::Vector2d(1.0, -1.0), MatrixXd::Identity(2, 2), false};
  EXPECT_EQ(mahalanobis(ls.mu, ls), 0.0);
  EXPECT_NEAR(mahalanobis(ls.mu + Eigen::Vector2d(3, 4), ls), 25.0, 1e-12);
  ls.V << 4, 1, 1, 1;
  ls.diag_approx = true;
  EXPECT_NEAR(mahalanobis(ls.mu + Eigen::Vector2d(2, 1), ls), 2.0, 1e-12);
  ls.diag_approx = false;
  // Full metric: [2 1] [[4,1],[1,1]]^{-1} [2 1]' = (4 - 4 + 4) / 3
  EXPECT_NEAR(mahalanobis(ls.mu + Eigen::Vector2d(2, 1), ls), 4.0 / 3.0, 1e-12);
}

TEST(Mahalanobis, SingularThrows) {
  LocationScatter ls{VectorXd::Zero(2), MatrixXd::Zero(2, 2), false};
  ls.V << 1, 1, 1, 1;
  EXPECT_THROW(mahalanobis(Eigen::Vector2d(1, 0), ls), SingularScatter);
  ls.V << 1, 0, 0, 0;
  ls.diag_approx = true;
  EXPECT_THROW(mahalanobis(Eigen::Vector2d(1, 0), ls), SingularScatter);
}
