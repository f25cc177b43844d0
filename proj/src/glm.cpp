#include "dtrmis/glm.hpp"

#include <cmath>
#include <string>

namespace dtrmis {

namespace {

// log(expit(eta)) and log(1 - expit(eta)) without cancellation.
double log_expit(double eta) {
  return eta >= 0.0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
}

void require_full_rank(const Eigen::MatrixXd& design, double rank_tolerance,
                       const char* what) {
  if (design.rows() < design.cols())
    throw RankDeficientError(std::string(what) + ": fewer rows (" +
                             std::to_string(design.rows()) + ") than columns (" +
                             std::to_string(design.cols()) + ")");
  const auto rank = design_rank(design, rank_tolerance);
  if (rank < design.cols())
    throw RankDeficientError(std::string(what) + ": design rank " + std::to_string(rank) +
                             " < " + std::to_string(design.cols()) + " columns");
}

}  // namespace

Eigen::Index design_rank(const Eigen::MatrixXd& design, double rank_tolerance) {
  if (design.cols() == 0) return 0;
  if (design.rows() == 0) return 0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(rank_tolerance);
  return qr.rank();
}

double logistic_log_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                               const Eigen::VectorXd& coefficients) {
  const Eigen::VectorXd eta = design * coefficients;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    ll += response(i) > 0.5 ? log_expit(eta(i)) : log_expit(-eta(i));
  return ll;
}

Eigen::VectorXd logistic_score(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                               const Eigen::VectorXd& coefficients) {
  const Eigen::VectorXd eta = design * coefficients;
  const Eigen::VectorXd mu = eta.unaryExpr([](double v) { return expit(v); });
  return design.transpose() * (response - mu);
}

GlmFit fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    const GlmOptions& options) {
  if (design.rows() != response.size())
    throw std::invalid_argument("design and response lengths differ");
  for (Eigen::Index i = 0; i < response.size(); ++i)
    if (response(i) != 0.0 && response(i) != 1.0)
      throw DataError("logistic response must be 0/1 (row " + std::to_string(i) + ")");
  require_full_rank(design, options.rank_tolerance, "logistic regression");

  const Eigen::Index p = design.cols();
  GlmFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(p);
  double ll = logistic_log_likelihood(design, response, fit.coefficients);

  for (int it = 1; it <= options.max_iterations; ++it) {
    fit.iterations = it;
    const Eigen::VectorXd eta = design * fit.coefficients;
    Eigen::VectorXd mu(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      mu(i) = expit(eta(i));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    const Eigen::VectorXd score = design.transpose() * (response - mu);
    fit.max_abs_score = score.cwiseAbs().maxCoeff();
    if (fit.max_abs_score <= options.score_tolerance) {
      fit.converged = true;
      break;
    }

    // Newton step from the weighted normal equations, solved by QR on sqrt(W) X.
    const Eigen::VectorXd sw = w.cwiseSqrt().cwiseMax(1e-150);
    const Eigen::MatrixXd wx = design.array().colwise() * sw.array();
    const Eigen::VectorXd z = (response - mu).cwiseQuotient(sw);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wx);
    const Eigen::VectorXd step = qr.solve(z);

    double scale = 1.0;
    Eigen::VectorXd next = fit.coefficients + step;
    double next_ll = logistic_log_likelihood(design, response, next);
    for (int halving = 0; halving < 30 && !(next_ll >= ll - 1e-12 * std::abs(ll)); ++halving) {
      scale *= 0.5;
      next = fit.coefficients + scale * step;
      next_ll = logistic_log_likelihood(design, response, next);
    }
    fit.coefficients = next;
    ll = next_ll;

    if (fit.coefficients.cwiseAbs().maxCoeff() > options.separation_threshold) {
      fit.separation_flag = true;
      break;
    }
  }

  // Under separation the score underflows long before the coefficients blow
  // up, so a "converged" fit can still sit at the boundary.
  if ((design * fit.coefficients).cwiseAbs().maxCoeff() > options.separation_eta) {
    fit.separation_flag = true;
    fit.converged = false;
  }
  if (!fit.converged && !fit.separation_flag) {
    fit.max_abs_score = logistic_score(design, response, fit.coefficients).cwiseAbs().maxCoeff();
    if (fit.max_abs_score <= options.score_tolerance) fit.converged = true;
  }
  return fit;
}

Eigen::VectorXd fit_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                        double rank_tolerance) {
  if (design.rows() != response.size())
    throw std::invalid_argument("design and response lengths differ");
  require_full_rank(design, rank_tolerance, "least squares");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(rank_tolerance);
  return qr.solve(response);
}

}  // namespace dtrmis
