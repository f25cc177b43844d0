#include "dtrmis/cli/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dtrmis::cli {

using nlohmann::ordered_json;

namespace {

std::string num(double v) { return format_double(v); }
std::string num(std::optional<double> v) { return v ? format_double(*v) : std::string(); }

std::string join(const std::vector<std::string>& fields) {
  std::string s;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) s += ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      s += '"';
      for (char c : f) s += c == '"' ? std::string("\"\"") : std::string(1, c);
      s += '"';
    } else {
      s += f;
    }
  }
  return s + "\n";
}

ordered_json jnum(std::optional<double> v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json scenario_json(const SimulationConfig& c) {
  const ScenarioConfig& s = c.scenario;
  ordered_json j;
  j["scenario"] = std::string(to_string(s.scenario));
  j["n"] = s.n;
  if (s.scenario == Scenario::predictive) j["test_n"] = s.test_n;
  j["rho"] = s.rho;
  j["gamma10"] = s.rates.gamma10();
  j["gamma01"] = s.rates.gamma01();
  j["replications"] = s.replications;
  j["bootstrap_samples"] = s.bootstrap_samples;
  j["seed"] = s.seed;
  return j;
}

std::string fixed(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string padr(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string header_line(const SimulationConfig& c) {
  const ScenarioConfig& s = c.scenario;
  std::ostringstream o;
  o << to_string(s.scenario) << ": n=" << s.n;
  if (s.scenario == Scenario::predictive) o << " test_n=" << s.test_n;
  o << " rho=" << fixed("%.2f", s.rho) << " (gamma10, gamma01)=(" << fixed("%.3f", s.rates.gamma10())
    << ", " << fixed("%.3f", s.rates.gamma01()) << ") reps=" << s.replications
    << " B=" << s.bootstrap_samples << " seed=" << s.seed << "\n";
  return o.str();
}

}  // namespace

std::string render_simulation_report(const SimulationConfig& config,
                                     const SimulationResults& results, OutputFormat format) {
  const ScenarioConfig& s = config.scenario;
  if (format == OutputFormat::csv) {
    std::string out = join({"scenario", "n", "rho", "gamma10", "gamma01", "method", "parameter",
                            "truth", "mean", "bias", "se", "rmse", "cr", "replications",
                            "failures"});
    for (Method m : config.methods) {
      const auto it = results.find(m);
      if (it == results.end()) continue;
      for (const auto& p : it->second.parameters)
        out += join({std::string(to_string(s.scenario)), std::to_string(s.n), num(s.rho),
                     num(s.rates.gamma10()), num(s.rates.gamma01()), std::string(to_string(m)),
                     p.name, num(p.truth), num(p.mean), num(p.bias), num(p.se), num(p.rmse),
                     num(p.coverage), std::to_string(it->second.replications),
                     std::to_string(it->second.failure_count)});
    }
    return out;
  }
  ordered_json j;
  j["config"] = scenario_json(config);
  ordered_json records = ordered_json::array();
  for (Method m : config.methods) {
    const auto it = results.find(m);
    if (it == results.end()) continue;
    for (const auto& p : it->second.parameters) {
      ordered_json r;
      r["method"] = std::string(to_string(m));
      r["parameter"] = p.name;
      r["truth"] = p.truth;
      r["mean"] = p.mean;
      r["bias"] = p.bias;
      r["se"] = p.se;
      r["rmse"] = p.rmse;
      r["cr"] = jnum(p.coverage);
      r["replications"] = it->second.replications;
      r["failures"] = it->second.failure_count;
      records.push_back(r);
    }
  }
  j["records"] = records;
  return j.dump(2) + "\n";
}

std::string render_predictive_report(const SimulationConfig& config,
                                     const PredictiveResults& results, OutputFormat format) {
  const ScenarioConfig& s = config.scenario;
  auto fields = [](const PredictionMetrics& m) {
    return std::vector<double>{m.regime_accuracy_stage2, m.regime_accuracy_stage1,
                               m.regime_accuracy_both,   m.outcome_error_rate,
                               m.sensitivity,            m.specificity};
  };
  const std::vector<std::string> names = {"stage2_accuracy", "stage1_accuracy", "both_accuracy",
                                          "error_rate",      "sensitivity",     "specificity"};
  if (format == OutputFormat::csv) {
    std::vector<std::string> head = {"scenario", "n", "test_n", "rho", "gamma10", "gamma01",
                                     "method"};
    head.insert(head.end(), names.begin(), names.end());
    head.push_back("replications");
    head.push_back("failures");
    std::string out = join(head);
    for (Method m : config.methods) {
      const auto it = results.find(m);
      if (it == results.end()) continue;
      std::vector<std::string> row = {std::string(to_string(s.scenario)), std::to_string(s.n),
                                      std::to_string(s.test_n), num(s.rho),
                                      num(s.rates.gamma10()), num(s.rates.gamma01()),
                                      std::string(to_string(m))};
      for (double v : fields(it->second.mean)) row.push_back(num(v));
      row.push_back(std::to_string(it->second.replications));
      row.push_back(std::to_string(it->second.failure_count));
      out += join(row);
    }
    return out;
  }
  ordered_json j;
  j["config"] = scenario_json(config);
  j["outcome_reference"] = config.reference == OutcomeReference::true_probability
                               ? "true_probability"
                               : "realized_draw";
  ordered_json records = ordered_json::array();
  for (Method m : config.methods) {
    const auto it = results.find(m);
    if (it == results.end()) continue;
    ordered_json r;
    r["method"] = std::string(to_string(m));
    const auto v = fields(it->second.mean);
    for (std::size_t k = 0; k < names.size(); ++k) r[names[k]] = v[k];
    r["replications"] = it->second.replications;
    r["failures"] = it->second.failure_count;
    records.push_back(r);
  }
  j["records"] = records;
  return j.dump(2) + "\n";
}

std::string render_sensitivity_report(const SensitivityReport& report, OutputFormat format) {
  auto g10 = [](const std::optional<MisclassRates>& g) {
    return g ? std::optional<double>(g->gamma10()) : std::nullopt;
  };
  auto g01 = [](const std::optional<MisclassRates>& g) {
    return g ? std::optional<double>(g->gamma01()) : std::nullopt;
  };
  if (format == OutputFormat::csv) {
    std::string out = join({"method", "gamma10", "gamma01", "parameter", "estimate", "se",
                            "ci_low", "ci_high"});
    for (const auto& r : report.records)
      out += join({r.method, num(g10(r.gamma)), num(g01(r.gamma)), r.parameter, num(r.estimate),
                   num(r.se), num(r.ci_low), num(r.ci_high)});
    return out;
  }
  ordered_json j;
  ordered_json records = ordered_json::array();
  for (const auto& r : report.records) {
    ordered_json o;
    o["method"] = r.method;
    o["gamma10"] = jnum(g10(r.gamma));
    o["gamma01"] = jnum(g01(r.gamma));
    o["parameter"] = r.parameter;
    o["estimate"] = r.estimate;
    o["se"] = jnum(r.se);
    o["ci_low"] = jnum(r.ci_low);
    o["ci_high"] = jnum(r.ci_high);
    records.push_back(o);
  }
  ordered_json rules = ordered_json::array();
  for (const auto& row : report.rows) {
    ordered_json o;
    o["method"] = row.method;
    o["gamma10"] = jnum(g10(row.gamma));
    o["gamma01"] = jnum(g01(row.gamma));
    o["rule"] = row.rule ? ordered_json(*row.rule) : ordered_json(nullptr);
    o["error"] = row.error ? ordered_json(*row.error) : ordered_json(nullptr);
    o["bootstrap_failures"] = row.bootstrap_failures;
    rules.push_back(o);
  }
  j["records"] = records;
  j["rules"] = rules;
  j["log"] = report.log;
  return j.dump(2) + "\n";
}

std::string simulation_table(const SimulationConfig& config, const SimulationResults& results) {
  std::string out = header_line(config);
  out += padr("method", 16) + padr("param", 8) + pad("Bias", 9) + pad("SE", 9) + pad("RMSE", 9) +
         pad("CR%", 8) + pad("fail", 6) + "\n";
  for (Method m : config.methods) {
    const auto it = results.find(m);
    if (it == results.end()) continue;
    for (const auto& p : it->second.parameters)
      out += padr(std::string(to_string(m)), 16) + padr(p.name, 8) +
             pad(fixed("%.3f", p.bias), 9) + pad(fixed("%.3f", p.se), 9) +
             pad(fixed("%.3f", p.rmse), 9) +
             pad(p.coverage ? fixed("%.1f", 100.0 * *p.coverage) : std::string("-"), 8) +
             pad(std::to_string(it->second.failure_count), 6) + "\n";
  }
  return out;
}

std::string predictive_table(const SimulationConfig& config, const PredictiveResults& results) {
  std::string out = header_line(config);
  out += padr("method", 16) + pad("Stage2%", 9) + pad("Stage1%", 9) + pad("Both%", 9) +
         pad("Error%", 9) + pad("Sens%", 9) + pad("Spec%", 9) + pad("fail", 6) + "\n";
  for (Method m : config.methods) {
    const auto it = results.find(m);
    if (it == results.end()) continue;
    const PredictionMetrics& v = it->second.mean;
    out += padr(std::string(to_string(m)), 16);
    for (double x : {v.regime_accuracy_stage2, v.regime_accuracy_stage1, v.regime_accuracy_both,
                     v.outcome_error_rate, v.sensitivity, v.specificity})
      out += pad(fixed("%.1f", 100.0 * x), 9);
    out += pad(std::to_string(it->second.failure_count), 6) + "\n";
  }
  return out;
}

std::string sensitivity_table(const SensitivityReport& report) {
  std::string out;
  for (const auto& line : report.log) out += "# " + line + "\n";
  out += padr("method", 15) + padr("(g10, g01)", 16) + padr("parameter", 24) + pad("est", 9) +
         pad("SE", 9) + "  95% CI\n";
  for (const auto& r : report.records) {
    const std::string g = r.gamma ? "(" + fixed("%.3f", r.gamma->gamma10()) + ", " +
                                        fixed("%.3f", r.gamma->gamma01()) + ")"
                                  : std::string("-");
    out += padr(r.method, 15) + padr(g, 16) + padr(r.parameter, 24) +
           pad(fixed("%.3f", r.estimate), 9) + pad(r.se ? fixed("%.3f", *r.se) : "-", 9);
    if (r.ci_low && r.ci_high)
      out += "  (" + fixed("%.3f", *r.ci_low) + ", " + fixed("%.3f", *r.ci_high) + ")";
    out += "\n";
  }
  for (const auto& row : report.rows) {
    const std::string g = row.gamma ? "(" + fixed("%.3f", row.gamma->gamma10()) + ", " +
                                          fixed("%.3f", row.gamma->gamma01()) + ")"
                                    : std::string("naive");
    if (row.rule) out += g + ": " + *row.rule + "\n";
    if (row.error) out += g + ": error: " + *row.error + "\n";
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace dtrmis::cli
