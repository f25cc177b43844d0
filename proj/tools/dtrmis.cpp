// dtrmis: simulate, analyze, validate-config.
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dtrmis/cli/analysis.hpp"
#include "dtrmis/cli/config.hpp"
#include "dtrmis/cli/report.hpp"
#include "dtrmis/sim.hpp"

namespace {

using namespace dtrmis;
using namespace dtrmis::cli;

enum Exit { ok = 0, config_error = 1, data_error = 2, numerical_error = 3 };

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--reps", o.reps, "Monte Carlo replications");
  cmd->add_option("--n", o.n, "training sample size");
  cmd->add_option("--rho", o.rho, "validation ratio");
  cmd->add_option("--gamma10", o.gamma10, "P(Y*=1 | Y=0)");
  cmd->add_option("--gamma01", o.gamma01, "P(Y*=0 | Y=1)");
  cmd->add_option("--out", o.out, "report path");
  cmd->add_option("--format", o.format, "csv or json");
}

int simulate(const std::string& path, const Overrides& o) {
  const SimulationConfig c = parse_simulation_config(load_json(path), o);
  if (c.scenario.scenario == Scenario::predictive) {
    PredictionOptions po;
    po.reference = c.reference;
    const PredictiveResults r = run_predictive(c.scenario, c.methods, po);
    write_text_file(c.output_path, render_predictive_report(c, r, c.output_format));
    std::cout << predictive_table(c, r);
    return ok;
  }
  try {
    const SimulationResults r = run_replications(c.scenario, c.methods);
    write_text_file(c.output_path, render_simulation_report(c, r, c.output_format));
    std::cout << simulation_table(c, r);
    return ok;
  } catch (const ReplicationFailure& e) {
    // keep what was computed
    write_text_file(c.output_path, render_simulation_report(c, e.results, c.output_format));
    std::cout << simulation_table(c, e.results);
    throw;
  }
}

int analyze(const std::string& path, const Overrides& o) {
  const AnalysisConfig c = parse_analysis_config(load_json(path), o);
  const SensitivityReport r = run_sensitivity(c);
  write_text_file(c.output_path, render_sensitivity_report(r, c.output_format));
  std::cout << sensitivity_table(r);
  if (!r.complete()) {
    std::cerr << "dtrmis: some grid points failed; see the report\n";
    return numerical_error;
  }
  return ok;
}

int validate(const std::string& path) {
  const auto j = load_json(path);
  if (detect_config_kind(j) == ConfigKind::simulation) {
    const SimulationConfig c = parse_simulation_config(j);
    std::cout << "ok: simulation config (" << to_string(c.scenario.scenario) << ")\n";
  } else {
    const AnalysisConfig c = parse_analysis_config(j);
    std::cout << "ok: analysis config (" << c.gamma_grid.size() << " grid points)\n";
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Q-learning with a misclassified binary outcome"};
  app.require_subcommand(1);

  std::string sim_path, analysis_path, check_path;
  Overrides sim_o, analysis_o;

  auto* sim = app.add_subcommand("simulate", "run a one_stage, two_stage or predictive study");
  sim->add_option("config", sim_path, "JSON config file")->required();
  add_overrides(sim, sim_o);

  auto* an = app.add_subcommand("analyze", "fixed-rate sensitivity analysis of a CSV file");
  an->add_option("config", analysis_path, "JSON config file")->required();
  add_overrides(an, analysis_o);

  auto* check = app.add_subcommand("validate-config", "check a config file without running it");
  check->add_option("config", check_path, "JSON config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*sim) return simulate(sim_path, sim_o);
    if (*an) return analyze(analysis_path, analysis_o);
    return validate(check_path);
  } catch (const ConfigError& e) {
    std::cerr << "dtrmis: config error: " << e.what() << "\n";
    return config_error;
  } catch (const DataError& e) {
    std::cerr << "dtrmis: data error: " << e.what() << "\n";
    return data_error;
  } catch (const NumericalError& e) {
    std::cerr << "dtrmis: numerical failure: " << e.what() << "\n";
    return numerical_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "dtrmis: config error: " << e.what() << "\n";
    return config_error;
  }
}
