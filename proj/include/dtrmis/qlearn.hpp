#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dtrmis/core.hpp"
#include "dtrmis/glm.hpp"
#include "dtrmis/mislik.hpp"
#include "dtrmis/rng.hpp"

namespace dtrmis {

enum class Method { validation_only, naive, mle_corrected };

std::string_view to_string(Method m);
/// Accepts "validation_only"/"v", "naive"/"n", "mle_corrected"/"mle".
Method parse_method(std::string_view text);

/// Column layout of a one- or two-stage Q-learning problem. `last` is the stage
/// whose Q-function is logistic in the outcome (stage 2, or the single stage);
/// `first` is the stage-1 model of a two-stage problem.
struct QLearnSpec {
  StageModel last;
  std::optional<StageModel> first;

  bool two_stage() const { return first.has_value(); }
  Stage last_stage() const { return two_stage() ? Stage::two : Stage::one; }
};

struct QLearnOptions {
  /// Rates held fixed in the corrected likelihood (sensitivity analysis).
  std::optional<MisclassRates> fixed_rates;
  /// Single-start warm start for the corrected fit, e.g. in bootstrap refits.
  std::optional<MisLikParams> mle_start;
  MleOptions mle;
  GlmOptions glm;
};

struct QLearnFit {
  Method method = Method::naive;
  StageModel last;
  std::optional<StageModel> first;
  std::optional<GlmFit> glm;
  std::optional<MleFit> mle;
  std::optional<MisclassRates> gamma_estimates;
  bool converged = false;
  bool separation = false;

  /// (psi_last, psi_first): every blip coefficient, final stage first.
  Eigen::VectorXd blip_estimates() const;
  Regime regime() const;
};

/// Blip parameter labels in blip_estimates() order, e.g. psi20 psi21 psi22 psi10 psi11.
std::vector<std::string> blip_names(const QLearnSpec& spec);

/// expit(beta'h0 + (psi'h1) a)
double q2_probability(const Eigen::VectorXd& h0, const Eigen::VectorXd& h1, int a,
                      const StageModel& model);

/// max over a of logit Q: beta'h0 + |psi'h1|.
double pseudo_outcome(const StageModel& model, const Eigen::VectorXd& h0,
                      const Eigen::VectorXd& h1);

/// Backward-recursive Q-learning. The final stage is fitted by logistic
/// regression on the surrogate (naive), on the validation rows' true outcome
/// (validation_only), or by the corrected likelihood (mle_corrected); the first
/// stage of a two-stage problem is fitted by least squares on pseudo-outcomes.
QLearnFit fit_qlearning(const StudyDataset& dataset, const QLearnSpec& spec, Method method,
                        const QLearnOptions& options = {});

struct PredictionMetrics {
  double regime_accuracy_stage2 = 0.0;
  double regime_accuracy_stage1 = 0.0;
  double regime_accuracy_both = 0.0;
  double outcome_error_rate = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

/// What the predicted outcome under the estimated regime is compared against.
enum class OutcomeReference {
  /// 1{true-model P(Y=1) > 0.5} under the estimated actions
  true_probability,
  /// a Bernoulli draw from the true-model P(Y=1) under the estimated actions
  realized_draw,
};

struct PredictionOptions {
  OutcomeReference reference = OutcomeReference::true_probability;
  double threshold = 0.5;
};

/// Regenerates a test trajectory's stage-2 history had stage-1 treatment `a1`
/// been given. Only available in simulation.
using CounterfactualGenerator =
    std::function<Trajectory(const Trajectory& observed, int a1, Stream& rng)>;

/// Compares an estimated two-stage regime with the data-generating one on
/// test data. Regime accuracies use the observed histories; outcome metrics
/// roll each test patient forward under the estimated regime.
PredictionMetrics evaluate_predictions(const QLearnFit& fit, const QLearnSpec& truth,
                                       const StudyDataset& test,
                                       const CounterfactualGenerator& counterfactual,
                                       Stream& rng, const PredictionOptions& options = {});

}  // namespace dtrmis
