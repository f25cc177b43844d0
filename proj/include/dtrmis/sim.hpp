#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dtrmis/core.hpp"
#include "dtrmis/qlearn.hpp"
#include "dtrmis/rng.hpp"

namespace dtrmis {

enum class Scenario { one_stage, two_stage, predictive };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view text);

struct ScenarioConfig {
  Scenario scenario = Scenario::one_stage;
  std::size_t n = 2000;
  std::size_t test_n = 5000;
  double rho = 0.5;
  MisclassRates rates;
  std::size_t replications = 500;
  std::size_t bootstrap_samples = 200;  // 0 skips coverage
  std::uint64_t seed = 1;

  /// Throws ConfigError.
  void validate() const;
};

// ---- data-generating models ------------------------------------------------

/// One-stage design: columns X, Z, treatment A; truth has
/// treatment-free (1, Z, X) = (1, 0.5, -1) and blip (1, X) = (0.5, -0.5).
QLearnSpec one_stage_truth();
StudyDataset generate_one_stage(std::size_t n, const MisclassRates& rates, Stream& data,
                                Stream& corruption);

/// Two-stage design: X1, Z1, A1, X2, Z2, A2. The stage-1 truth is the exact
/// least-squares projection of the true pseudo-outcome, computed from the
/// data-generating law (it is linear in a saturated (Z1, A1) design).
QLearnSpec two_stage_truth();
StudyDataset generate_two_stage(std::size_t n, const MisclassRates& rates, Stream& data,
                                Stream& corruption);
/// Redraws Z2 when the stage-1 treatment is changed to a1.
Trajectory two_stage_counterfactual(const Trajectory& observed, int a1, Stream& rng);

/// One-stage data shaped like a real-data sensitivity study: columns Age,
/// Diabetes, SmokeIntensity, treatment A, no validation rows.
QLearnSpec sensitivity_truth();
StudyDataset generate_sensitivity_data(std::size_t n, const MisclassRates& rates,
                                       Stream& data, Stream& corruption);

/// Moves a uniformly random subset of round(rho * n) rows to the front as the
/// validation subset; the rest lose their true outcome. Relative order is kept
/// within each part.
StudyDataset split_validation(const StudyDataset& dataset, double rho, Stream& rng);

// ---- bootstrap ---------------------------------------------------------------

/// Returns the blip estimates, or nullopt when the refit did not converge.
using Estimator = std::function<std::optional<Eigen::VectorXd>(const StudyDataset&)>;

struct BootstrapResult {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd se;
  std::size_t failures = 0;
  std::size_t samples = 0;
};

/// Resamples rows with replacement (within V and V-bar separately when
/// stratified), refits, and returns percentile intervals. Throws
/// NumericalError when more than 20% of refits fail.
BootstrapResult bootstrap_ci(const StudyDataset& dataset, const Estimator& estimator,
                             std::size_t samples, Stream& rng, bool stratified = true,
                             double level = 0.95);

/// Type-7 sample quantile of an unsorted vector.
double quantile(std::vector<double> values, double p);

// ---- replication harness -----------------------------------------------------

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double se = 0.0;
  double rmse = 0.0;
  std::optional<double> coverage;
};

struct ReplicationSummary {
  std::vector<ParameterSummary> parameters;
  std::size_t replications = 0;  // successful ones
  std::size_t failure_count = 0;
  std::size_t separation_count = 0;
  std::optional<double> gamma10_mean;
  std::optional<double> gamma01_mean;
  std::vector<Eigen::VectorXd> estimates;

  const ParameterSummary& at(std::string_view name) const;
};

using SimulationResults = std::map<Method, ReplicationSummary>;

struct HarnessOptions {
  /// 0 reads DTRMIS_THREADS, falling back to the hardware concurrency.
  std::size_t threads = 0;
  double level = 0.95;
  double failure_limit = 0.05;
};

/// Thrown when more than failure_limit of replications fail for some method.
class ReplicationFailure : public NumericalError {
 public:
  ReplicationFailure(const std::string& what, SimulationResults partial)
      : NumericalError(what), results(std::move(partial)) {}
  SimulationResults results;
};

std::size_t resolve_threads(std::size_t requested);

/// Runs one_stage or two_stage scenarios.
SimulationResults run_replications(const ScenarioConfig& config,
                                   const std::vector<Method>& methods,
                                   const HarnessOptions& options = {});

struct PredictiveSummary {
  PredictionMetrics mean;
  std::size_t replications = 0;
  std::size_t failure_count = 0;
};

using PredictiveResults = std::map<Method, PredictiveSummary>;

PredictiveResults run_predictive(const ScenarioConfig& config,
                                 const std::vector<Method>& methods,
                                 const PredictionOptions& prediction = {},
                                 const HarnessOptions& options = {});

}  // namespace dtrmis
