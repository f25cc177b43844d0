#pragma once

// Shared fixtures and independent oracles for the unit tests.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "dtrmis/core.hpp"
#include "dtrmis/mislik.hpp"
#include "dtrmis/rng.hpp"

namespace testing_support {

using namespace dtrmis;

inline Schema xz_schema() {
  Schema s;
  s.stage1_names = {"X", "Z"};
  s.treatment1_name = "A";
  return s;
}

/// One-stage model (1, Z, X | 1, X) on xz_schema.
inline StageModel xz_model() {
  const Schema s = xz_schema();
  return StageModel(parse_columns({"1", "Z", "X"}, s), parse_columns({"1", "X"}, s));
}

/// Small random dataset with nv validation rows; outcomes are drawn from a
/// logistic model then flipped with the given rates.
inline StudyDataset random_dataset(std::size_t n, std::size_t nv, std::uint64_t seed,
                                   MisclassRates rates = MisclassRates(0.15, 0.1)) {
  Stream rng(seed, 0, Purpose::test_data);
  std::vector<Trajectory> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    Trajectory& t = rows[i];
    const double x = rng.normal(0.5, 1.0);
    const double z = rng.sign(0.5);
    t.stage1_covariates = {x, z};
    t.treatment1 = rng.sign(0.5);
    const double eta = 0.3 + 0.4 * z - 0.6 * x + (0.5 - 0.5 * x) * t.treatment1;
    const int y = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
    t.surrogate_outcome = corrupt_outcome(y, rates, rng.uniform());
    if (i < nv) t.true_outcome = y;
  }
  return StudyDataset(xz_schema(), std::move(rows), nv);
}

/// Per-row scalar evaluation of the corrected log-likelihood, written out
/// cell by cell without the library's vectorized code.
inline double scalar_loglik(const std::vector<double>& eta, const std::vector<int>& ystar,
                            const std::vector<int>& ytrue, std::size_t nv, double g10,
                            double g01) {
  double total = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-eta[i]));
    if (i < nv) {
      const int s = ystar[i], y = ytrue[i];
      if (s == 1 && y == 1) total += std::log((1.0 - g01) * p);
      if (s == 1 && y == 0) total += std::log(g10 * (1.0 - p));
      if (s == 0 && y == 1) total += std::log(g01 * p);
      if (s == 0 && y == 0) total += std::log((1.0 - g10) * (1.0 - p));
    } else {
      const double p_star = g10 * (1.0 - p) + (1.0 - g01) * p;  // total probability
      total += ystar[i] == 1 ? std::log(p_star) : std::log(1.0 - p_star);
    }
  }
  return total;
}

/// Central differences of f at x.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd up = x, down = x;
    up(k) += h;
    down(k) -= h;
    g(k) = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

inline double plain_logistic_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-x.row(i).dot(b)));
    total += y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p);
  }
  return total;
}

}  // namespace testing_support
