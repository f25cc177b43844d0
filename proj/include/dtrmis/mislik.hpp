#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "dtrmis/bfgs.hpp"
#include "dtrmis/core.hpp"
#include "dtrmis/glm.hpp"

namespace dtrmis {

class IdentifiabilityError : public DataError {
 public:
  using DataError::DataError;
};

/// Parameters of the corrected outcome likelihood.
///
/// Free rates are carried on the logit scale so the optimizer runs
/// unconstrained. When `fixed_rates` is set the rates are constants and the
/// parameter vector is (beta, psi) only.
struct MisLikParams {
  Eigen::VectorXd beta;
  Eigen::VectorXd psi;
  double gamma10_logit = 0.0;
  double gamma01_logit = 0.0;
  std::optional<MisclassRates> fixed_rates;

  static MisLikParams free(Eigen::VectorXd beta, Eigen::VectorXd psi, double gamma10,
                           double gamma01);
  static MisLikParams fixed(Eigen::VectorXd beta, Eigen::VectorXd psi, MisclassRates rates);

  bool gamma_fixed() const { return fixed_rates.has_value(); }
  double gamma10() const;
  double gamma01() const;

  Eigen::Index size() const;
  /// (beta, psi[, logit gamma10, logit gamma01])
  Eigen::VectorXd to_vector() const;
  MisLikParams with_vector(const Eigen::VectorXd& v) const;
  Eigen::VectorXd coefficients() const;
};

struct LikelihoodOptions {
  double log_floor = 1e-12;  // log arguments are clamped below at this value
  bool strict = false;       // throw instead of clamping
};

/// P(Y* = 1 | h, a) = gamma10 + (1 - gamma10 - gamma01) P(Y = 1 | h, a).
double surrogate_prob(double p_true, const MisclassRates& rates);

/// Value and gradient of the combined validation + main-study log-likelihood.
struct LikelihoodEvaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
  std::size_t clamped = 0;
};

/// Binds a dataset and its final-stage design rows. Validation rows
/// contribute the joint (Y*, Y) cells, main-study rows the marginal of Y*.
class MisLikelihood {
 public:
  MisLikelihood(const StudyDataset& dataset, DesignRows design,
                LikelihoodOptions options = {});

  LikelihoodEvaluation evaluate(const MisLikParams& params, bool with_gradient = true) const;

  const Eigen::MatrixXd& design() const { return design_; }
  Eigen::Index rows() const { return design_.rows(); }
  Eigen::Index validation_count() const { return validation_count_; }
  const Eigen::VectorXd& surrogate() const { return surrogate_; }
  const Eigen::VectorXd& truth() const { return truth_; }

 private:
  Eigen::MatrixXd design_;
  Eigen::VectorXd surrogate_;
  Eigen::VectorXd truth_;  // validation rows only
  Eigen::Index validation_count_ = 0;
  LikelihoodOptions options_;
};

double log_likelihood(const MisLikParams& params, const StudyDataset& dataset,
                      const DesignRows& design, const LikelihoodOptions& options = {});

Eigen::VectorXd log_likelihood_gradient(const MisLikParams& params, const StudyDataset& dataset,
                                        const DesignRows& design,
                                        const LikelihoodOptions& options = {});

struct MleOptions {
  BfgsOptions optimizer;
  LikelihoodOptions likelihood;
  GlmOptions glm;
  std::optional<MisclassRates> fixed_rates;
  double initial_gamma = 0.05;
};

struct MleFit {
  MisLikParams params;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool monotonicity_violated = false;
  std::size_t clamped_terms = 0;
  int starts_tried = 0;
};

/// Maximizes the corrected likelihood of the final stage from `init`.
MleFit fit_mle(const StudyDataset& dataset, const StageModel& model, Stage stage,
               const MisLikParams& init, const MleOptions& options = {});

/// Multi-start maximization: from the naive logistic fit with both rates at
/// `initial_gamma`, and from the validation-only fit with rates taken from the
/// validation cross-table. The highest likelihood wins.
MleFit fit_mle(const StudyDataset& dataset, const StageModel& model, Stage stage,
               const MleOptions& options = {});

/// Cross-table rate estimates from the validation rows, clipped to [0.01, 0.49].
std::pair<double, double> validation_rate_guess(const StudyDataset& dataset);

struct IdentifiabilityReport {
  Eigen::Index design_rank = 0;
  Eigen::Index design_columns = 0;
  double condition_number = 0.0;
  bool rank_deficient = false;
  double gamma_margin = 1.0;  // 1 - gamma10 - gamma01
  bool monotonicity_violated = false;
  std::size_t boundary_count = 0;  // fitted P(Y=1) within 1e-6 of 0 or 1
  bool boundary_warning = false;

  bool ok() const { return !rank_deficient && !monotonicity_violated && !boundary_warning; }
};

/// Diagnostic checks around a fitted final-stage model: design rank and
/// conditioning, the monotonicity margin, and fitted probabilities at the
/// boundary. Never throws on an unfavourable result.
IdentifiabilityReport check_identifiability(const StudyDataset& dataset,
                                            const StageModel& fitted, Stage stage,
                                            double gamma10, double gamma01);

}  // namespace dtrmis
