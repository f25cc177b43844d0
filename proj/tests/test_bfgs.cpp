#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "dtrmis/bfgs.hpp"

using namespace dtrmis;

TEST(Bfgs, Rosenbrock) {
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double a = 1 - x(0), b = x(1) - x(0) * x(0);
    g.resize(2);
    g(0) = -2 * a - 400 * x(0) * b;
    g(1) = 200 * b;
    return a * a + 100 * b * b;
  };
  const BfgsResult r = minimize_bfgs(f, Eigen::Vector2d(-1.2, 1.0));
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.x(0), 1.0, 1e-5);
  EXPECT_NEAR(r.x(1), 1.0, 1e-5);
}

TEST(Bfgs, QuadraticExactMinimizer) {
  Eigen::Matrix3d a;
  a << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const Eigen::Vector3d b(1, -2, 0.5);
  const Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = a * x - b;
    return 0.5 * x.dot(a * x) - b.dot(x);
  };
  const BfgsResult r = minimize_bfgs(f, Eigen::Vector3d::Zero());
  ASSERT_TRUE(r.converged);
  EXPECT_LE((r.x - a.ldlt().solve(b)).norm(), 1e-6);
  EXPECT_LE(r.gradient_norm, 1e-6 * std::max(1.0, std::abs(r.value)));
}

TEST(Bfgs, NonFiniteStartThrows) {
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = x;
    return std::numeric_limits<double>::quiet_NaN();
  };
  EXPECT_THROW(minimize_bfgs(f, Eigen::Vector2d(1, 1)), std::domain_error);
}

TEST(Bfgs, IterationCapReportsNonConvergence) {
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double a = 1 - x(0), b = x(1) - x(0) * x(0);
    g.resize(2);
    g(0) = -2 * a - 400 * x(0) * b;
    g(1) = 200 * b;
    return a * a + 100 * b * b;
  };
  BfgsOptions o;
  o.max_iterations = 3;
  const BfgsResult r = minimize_bfgs(f, Eigen::Vector2d(-1.2, 1.0), o);
  EXPECT_FALSE(r.converged);
  EXPECT_LE(r.iterations, 3);
}
