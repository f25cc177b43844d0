#pragma once

#include <Eigen/Dense>

#include "dtrmis/core.hpp"

namespace dtrmis {

class RankDeficientError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct GlmOptions {
  int max_iterations = 100;
  double score_tolerance = 1e-8;    // on max |score|
  double rank_tolerance = 1e-10;    // relative to the largest R diagonal
  double separation_threshold = 30; // coefficient inf-norm signalling divergence
  double separation_eta = 20;       // |fitted linear predictor| treated as at the boundary
};

struct GlmFit {
  Eigen::VectorXd coefficients;
  bool converged = false;
  int iterations = 0;
  double max_abs_score = 0.0;
  bool separation_flag = false;
};

/// Numerical rank of `design` from a column-pivoting QR.
Eigen::Index design_rank(const Eigen::MatrixXd& design, double rank_tolerance = 1e-10);

/// Bernoulli log-likelihood with logit link.
double logistic_log_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                               const Eigen::VectorXd& coefficients);
Eigen::VectorXd logistic_score(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                               const Eigen::VectorXd& coefficients);

/// Logistic regression by IRLS with step halving. Throws RankDeficientError
/// when the design is not of full column rank.
GlmFit fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    const GlmOptions& options = {});

/// Least squares via rank-revealing QR. Throws RankDeficientError.
Eigen::VectorXd fit_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                        double rank_tolerance = 1e-10);

}  // namespace dtrmis
