#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dtrmis/cli/csv.hpp"
#include "dtrmis/core.hpp"
#include "dtrmis/qlearn.hpp"
#include "dtrmis/sim.hpp"

namespace dtrmis::cli {

enum class OutputFormat { csv, json };

std::string_view to_string(OutputFormat f);
OutputFormat parse_format(std::string_view text);

struct StageColumns {
  std::vector<std::string> treatment_free;
  std::vector<std::string> blip;
};

struct AnalysisConfig {
  std::string input_path;
  std::string outcome_column;
  std::vector<std::string> treatment_columns;
  std::vector<StageColumns> stages;  // stages[0] is stage 1
  std::vector<std::string> standardize_columns;
  std::vector<MisclassRates> gamma_grid;
  std::size_t bootstrap_samples = 200;
  std::uint64_t seed = 1;
  std::string output_path = "sensitivity.csv";
  OutputFormat output_format = OutputFormat::csv;
  std::optional<std::string> validation_column;
  std::optional<std::string> true_outcome_column;

  /// Throws ConfigError.
  void validate() const;
  /// Covariates referenced by the stage columns, split into the stage each
  /// first appears in.
  IngestSpec ingest_spec() const;
};

struct SimulationConfig {
  ScenarioConfig scenario;
  std::vector<Method> methods{Method::validation_only, Method::naive, Method::mle_corrected};
  OutcomeReference reference = OutcomeReference::true_probability;
  std::string output_path = "simulation.csv";
  OutputFormat output_format = OutputFormat::csv;

  void validate() const;
};

/// Command-line values that override the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> n;
  std::optional<double> rho;
  std::optional<double> gamma10;
  std::optional<double> gamma01;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

nlohmann::json load_json(const std::string& path);

SimulationConfig parse_simulation_config(const nlohmann::json& j, const Overrides& o = {});
AnalysisConfig parse_analysis_config(const nlohmann::json& j, const Overrides& o = {});

enum class ConfigKind { simulation, analysis };
/// A file with a "scenario" key is a simulation config, one with "input_path"
/// an analysis config.
ConfigKind detect_config_kind(const nlohmann::json& j);

}  // namespace dtrmis::cli
