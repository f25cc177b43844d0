#pragma once

#include <functional>

#include <Eigen/Dense>

namespace dtrmis {

/// Objective for minimization: returns f(x) and writes the gradient.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& gradient)>;

struct BfgsOptions {
  int max_iterations = 500;
  /// Converged when ||g||_2 <= gradient_tolerance * max(1, |f|).
  double gradient_tolerance = 1e-6;
  double armijo = 1e-4;
  int max_backtracks = 60;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Quasi-Newton minimization with an inverse-Hessian BFGS update and
/// backtracking Armijo line search. Non-finite trial values are treated as
/// infeasible and shrink the step.
BfgsResult minimize_bfgs(const Objective& objective, Eigen::VectorXd x0,
                         const BfgsOptions& options = {});

}  // namespace dtrmis
