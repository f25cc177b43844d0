#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dtrmis/cli/config.hpp"
#include "dtrmis/core.hpp"

namespace dtrmis::cli {

struct SensitivityRecord {
  std::string method;              // naive or mle_corrected
  std::optional<MisclassRates> gamma;  // unset for the naive fit
  std::string parameter;
  double estimate = 0.0;
  std::optional<double> se;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

/// One fitted rule (or the error that stopped it) per grid point.
struct SensitivityRow {
  std::string method;
  std::optional<MisclassRates> gamma;
  std::optional<std::string> rule;
  std::optional<std::string> error;
  std::size_t bootstrap_failures = 0;
};

struct SensitivityReport {
  std::vector<SensitivityRecord> records;
  std::vector<SensitivityRow> rows;
  std::vector<std::string> log;

  bool complete() const;
};

/// "â = 1 if -0.148 + 0.130·Diabetes + 0.075·SmokeIntensity > 0"
std::string render_rule(const Eigen::VectorXd& psi, const std::vector<ColumnSpec>& blip);

/// Naive fit, then a fixed-rate corrected fit per grid point, each with an
/// unstratified bootstrap. A failed grid point is reported and skipped.
SensitivityReport run_sensitivity(const AnalysisConfig& config, const StudyDataset& data);
/// Reads config.input_path first; ingestion notes go to the report log.
SensitivityReport run_sensitivity(const AnalysisConfig& config);

}  // namespace dtrmis::cli
