#include "dtrmis/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace dtrmis::cli {

using nlohmann::json;

std::string_view to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json"; }

OutputFormat parse_format(std::string_view text) {
  if (text == "csv") return OutputFormat::csv;
  if (text == "json") return OutputFormat::json;
  throw ConfigError("unknown output format '" + std::string(text) + "' (csv or json)");
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

ConfigKind detect_config_kind(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("scenario")) return ConfigKind::simulation;
  if (j.contains("input_path")) return ConfigKind::analysis;
  throw ConfigError("config has neither a \"scenario\" nor an \"input_path\" key");
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

// Typed access with the key path in every error.
template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " is missing or has the wrong type");
  }
}

template <class T>
std::optional<T> get_opt(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  return get<T>(j, key, where);
}

MisclassRates rates(double g10, double g01, const std::string& where) {
  if (!MisclassRates::admissible(g10, g01))
    throw ConfigError(where + ": rates (" + format_double(g10) + ", " + format_double(g01) +
                      ") violate 0 <= gamma < 1, gamma10 + gamma01 < 1");
  return MisclassRates(g10, g01);
}

MisclassRates parse_rate_point(const json& p, const std::string& where) {
  if (p.is_array()) {
    if (p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ConfigError(where + " must be [gamma10, gamma01]");
    return rates(p[0].get<double>(), p[1].get<double>(), where);
  }
  if (p.is_object()) {
    reject_unknown(p, {"gamma10", "gamma01"}, where);
    return rates(get<double>(p, "gamma10", where), get<double>(p, "gamma01", where), where);
  }
  throw ConfigError(where + " must be [gamma10, gamma01] or {\"gamma10\":..,\"gamma01\":..}");
}

std::size_t count(const json& j, const std::string& key, const std::string& where) {
  const auto v = get<long long>(j, key, where);
  if (v < 0) throw ConfigError(where + "." + key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

struct OutputSection {
  std::optional<std::string> path;
  std::optional<std::string> format;
};

OutputSection parse_output(const json& j) {
  OutputSection s;
  if (!j.contains("output")) return s;
  const json& o = j.at("output");
  if (!o.is_object()) throw ConfigError("output must be an object");
  reject_unknown(o, {"path", "format"}, "output");
  s.path = get_opt<std::string>(o, "path", "output");
  s.format = get_opt<std::string>(o, "format", "output");
  return s;
}

std::vector<std::string> names_in(const std::vector<std::string>& columns) {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    std::size_t start = 0;
    while (start <= c.size()) {
      const std::size_t star = c.find('*', start);
      std::string f = c.substr(start, star == std::string::npos ? std::string::npos : star - start);
      f.erase(0, f.find_first_not_of(' '));
      f.erase(f.find_last_not_of(' ') + 1);
      if (!f.empty() && f != "1") out.push_back(f);
      if (star == std::string::npos) break;
      start = star + 1;
    }
  }
  return out;
}

}  // namespace

void SimulationConfig::validate() const {
  scenario.validate();
  if (methods.empty()) throw ConfigError("methods must not be empty");
  std::set<Method> seen(methods.begin(), methods.end());
  if (seen.size() != methods.size()) throw ConfigError("methods contain duplicates");
}

SimulationConfig parse_simulation_config(const json& j, const Overrides& o) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"scenario", "n", "test_n", "rho", "gamma10", "gamma01", "replications",
                  "bootstrap_samples", "seed", "methods", "outcome_reference", "output"},
                 "simulation config");
  const std::string w = "config";
  SimulationConfig c;
  c.scenario.scenario = parse_scenario(get<std::string>(j, "scenario", w));
  if (j.contains("n")) c.scenario.n = count(j, "n", w);
  if (j.contains("test_n")) c.scenario.test_n = count(j, "test_n", w);
  if (j.contains("rho")) c.scenario.rho = get<double>(j, "rho", w);
  if (j.contains("replications")) c.scenario.replications = count(j, "replications", w);
  if (j.contains("bootstrap_samples"))
    c.scenario.bootstrap_samples = count(j, "bootstrap_samples", w);
  if (j.contains("seed")) c.scenario.seed = get<std::uint64_t>(j, "seed", w);
  double g10 = get_opt<double>(j, "gamma10", w).value_or(0.0);
  double g01 = get_opt<double>(j, "gamma01", w).value_or(0.0);
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : get<std::vector<std::string>>(j, "methods", w))
      c.methods.push_back(parse_method(m));
  }
  if (j.contains("outcome_reference")) {
    const auto r = get<std::string>(j, "outcome_reference", w);
    if (r == "true_probability")
      c.reference = OutcomeReference::true_probability;
    else if (r == "realized_draw")
      c.reference = OutcomeReference::realized_draw;
    else
      throw ConfigError("outcome_reference must be true_probability or realized_draw");
  }
  const OutputSection out = parse_output(j);
  if (out.path) c.output_path = *out.path;
  if (out.format) c.output_format = parse_format(*out.format);

  if (o.seed) c.scenario.seed = *o.seed;
  if (o.reps) c.scenario.replications = *o.reps;
  if (o.n) c.scenario.n = *o.n;
  if (o.rho) c.scenario.rho = *o.rho;
  if (o.gamma10) g10 = *o.gamma10;
  if (o.gamma01) g01 = *o.gamma01;
  if (o.out) c.output_path = *o.out;
  if (o.format) c.output_format = parse_format(*o.format);
  c.scenario.rates = rates(g10, g01, "gamma10/gamma01");
  c.validate();
  return c;
}

void AnalysisConfig::validate() const {
  if (input_path.empty()) throw ConfigError("input_path must be set");
  if (outcome_column.empty()) throw ConfigError("outcome_column must be set");
  if (treatment_columns.empty() || treatment_columns.size() > 2)
    throw ConfigError("treatment_columns must name one or two columns");
  if (stages.size() != treatment_columns.size())
    throw ConfigError("stages must list one entry per treatment column");
  for (std::size_t s = 0; s < stages.size(); ++s)
    if (stages[s].blip.empty())
      throw ConfigError("stage " + std::to_string(s + 1) +
                        " needs at least one blip column (the intercept \"1\")");
  for (const auto& r : gamma_grid)
    if (!MisclassRates::admissible(r.gamma10(), r.gamma01()))
      throw ConfigError("gamma grid point violates monotonicity");
  if (bootstrap_samples != 0 && bootstrap_samples < 50)
    throw ConfigError("bootstrap_samples must be 0 or at least 50");
  if (validation_column.has_value() != true_outcome_column.has_value())
    throw ConfigError("validation_column and true_outcome_column go together");
}

IngestSpec AnalysisConfig::ingest_spec() const {
  IngestSpec s;
  s.outcome_column = outcome_column;
  s.treatment_columns = treatment_columns;
  s.validation_column = validation_column;
  s.true_outcome_column = true_outcome_column;
  std::set<std::string> seen(treatment_columns.begin(), treatment_columns.end());
  for (std::size_t st = 0; st < stages.size(); ++st) {
    auto& dest = st == 0 ? s.stage1_covariates : s.stage2_covariates;
    std::vector<std::string> cols = stages[st].treatment_free;
    cols.insert(cols.end(), stages[st].blip.begin(), stages[st].blip.end());
    for (const auto& name : names_in(cols))
      if (seen.insert(name).second) dest.push_back(name);
  }
  return s;
}

AnalysisConfig parse_analysis_config(const json& j, const Overrides& o) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"input_path", "outcome_column", "treatment_columns", "stages",
                  "standardize_columns", "gamma_grid", "bootstrap_samples", "seed", "output",
                  "validation_column", "true_outcome_column"},
                 "analysis config");
  const std::string w = "config";
  AnalysisConfig c;
  c.input_path = get<std::string>(j, "input_path", w);
  c.outcome_column = get<std::string>(j, "outcome_column", w);
  const json& t = j.contains("treatment_columns") ? j.at("treatment_columns") : json();
  if (t.is_string())
    c.treatment_columns = {t.get<std::string>()};
  else
    c.treatment_columns = get<std::vector<std::string>>(j, "treatment_columns", w);

  const json& stages = j.contains("stages") ? j.at("stages") : json();
  if (!stages.is_array() || stages.empty())
    throw ConfigError("stages must be a non-empty array of {treatment_free, blip}");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const std::string ws = "stages[" + std::to_string(s) + "]";
    if (!stages[s].is_object()) throw ConfigError(ws + " must be an object");
    reject_unknown(stages[s], {"treatment_free", "blip"}, ws);
    StageColumns sc;
    sc.treatment_free = get<std::vector<std::string>>(stages[s], "treatment_free", ws);
    sc.blip = get<std::vector<std::string>>(stages[s], "blip", ws);
    c.stages.push_back(std::move(sc));
  }
  if (j.contains("standardize_columns"))
    c.standardize_columns = get<std::vector<std::string>>(j, "standardize_columns", w);
  if (j.contains("gamma_grid")) {
    const json& g = j.at("gamma_grid");
    if (!g.is_array()) throw ConfigError("gamma_grid must be an array");
    for (std::size_t k = 0; k < g.size(); ++k)
      c.gamma_grid.push_back(parse_rate_point(g[k], "gamma_grid[" + std::to_string(k) + "]"));
  }
  if (j.contains("bootstrap_samples")) c.bootstrap_samples = count(j, "bootstrap_samples", w);
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", w);
  c.validation_column = get_opt<std::string>(j, "validation_column", w);
  c.true_outcome_column = get_opt<std::string>(j, "true_outcome_column", w);
  const OutputSection out = parse_output(j);
  if (out.path) c.output_path = *out.path;
  if (out.format) c.output_format = parse_format(*out.format);

  if (o.reps || o.n || o.rho)
    throw ConfigError("--reps, --n and --rho apply to simulate only");
  if (o.seed) c.seed = *o.seed;
  if (o.gamma10 || o.gamma01)
    c.gamma_grid = {rates(o.gamma10.value_or(0.0), o.gamma01.value_or(0.0), "--gamma10/--gamma01")};
  if (o.out) c.output_path = *o.out;
  if (o.format) c.output_format = parse_format(*o.format);
  c.validate();
  return c;
}

}  // namespace dtrmis::cli
