#include "dtrmis/bfgs.hpp"

#include <cmath>
#include <stdexcept>

namespace dtrmis {

namespace {

bool small_gradient(double gnorm, double value, double tol) {
  return gnorm <= tol * std::max(1.0, std::abs(value));
}

}  // namespace

BfgsResult minimize_bfgs(const Objective& objective, Eigen::VectorXd x0,
                         const BfgsOptions& options) {
  const Eigen::Index n = x0.size();
  BfgsResult r;
  r.x = std::move(x0);
  r.gradient.resize(n);
  r.value = objective(r.x, r.gradient);
  r.evaluations = 1;
  if (!std::isfinite(r.value) || !r.gradient.allFinite())
    throw std::domain_error("objective is not finite at the starting point");
  r.gradient_norm = r.gradient.norm();

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  Eigen::VectorXd trial_x(n), trial_g(n);

  for (int it = 0; it < options.max_iterations; ++it) {
    if (small_gradient(r.gradient_norm, r.value, options.gradient_tolerance)) {
      r.converged = true;
      return r;
    }
    r.iterations = it + 1;

    Eigen::VectorXd dir = -h * r.gradient;
    double slope = r.gradient.dot(dir);
    if (!(slope < 0.0)) {
      h.setIdentity();
      scaled = false;
      dir = -r.gradient;
      slope = -r.gradient.squaredNorm();
    }
    // keep the first unscaled step from leaving the region of interest
    double step = 1.0;
    if (!scaled) step = std::min(1.0, 1.0 / std::max(1e-300, dir.norm()));

    bool accepted = false;
    double trial_f = r.value;
    for (int k = 0; k < options.max_backtracks; ++k) {
      trial_x = r.x + step * dir;
      trial_f = objective(trial_x, trial_g);
      ++r.evaluations;
      if (std::isfinite(trial_f) && trial_g.allFinite() &&
          trial_f <= r.value + options.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // no progress possible along this direction; retry once from steepest descent
      if (h.isIdentity()) break;
      h.setIdentity();
      scaled = false;
      continue;
    }

    const Eigen::VectorXd s = trial_x - r.x;
    const Eigen::VectorXd y = trial_g - r.gradient;
    r.x = trial_x;
    r.value = trial_f;
    r.gradient = trial_g;
    r.gradient_norm = r.gradient.norm();

    const double ys = y.dot(s);
    if (ys > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h *= ys / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / ys;
      const Eigen::VectorXd hy = h * y;
      const double yhy = y.dot(hy);
      // H+ = H - rho (s hy' + hy s') + (rho^2 y'Hy + rho) s s'
      h.noalias() -= rho * (s * hy.transpose() + hy * s.transpose());
      h.noalias() += (rho * rho * yhy + rho) * (s * s.transpose());
    }
  }
  r.converged = small_gradient(r.gradient_norm, r.value, options.gradient_tolerance);
  return r;
}

}  // namespace dtrmis
