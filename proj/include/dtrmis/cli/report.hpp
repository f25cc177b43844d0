#pragma once

#include <string>

#include "dtrmis/cli/analysis.hpp"
#include "dtrmis/cli/config.hpp"
#include "dtrmis/sim.hpp"

namespace dtrmis::cli {

// Machine-readable reports keep full precision; column order is fixed.
std::string render_simulation_report(const SimulationConfig& config,
                                     const SimulationResults& results, OutputFormat format);
std::string render_predictive_report(const SimulationConfig& config,
                                     const PredictiveResults& results, OutputFormat format);
std::string render_sensitivity_report(const SensitivityReport& report, OutputFormat format);

// Fixed-width summaries for the terminal: 3 decimals, percentages 1 decimal.
std::string simulation_table(const SimulationConfig& config, const SimulationResults& results);
std::string predictive_table(const SimulationConfig& config, const PredictiveResults& results);
std::string sensitivity_table(const SensitivityReport& report);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace dtrmis::cli
