#include "dtrmis/cli/analysis.hpp"

#include <cmath>
#include <cstdio>

#include "dtrmis/qlearn.hpp"
#include "dtrmis/rng.hpp"
#include "dtrmis/sim.hpp"

namespace dtrmis::cli {

bool SensitivityReport::complete() const {
  for (const auto& r : rows)
    if (r.error) return false;
  return true;
}

std::string render_rule(const Eigen::VectorXd& psi, const std::vector<ColumnSpec>& blip) {
  std::string s = "\xC3\xA2 = 1 if";  // â
  char buf[64];
  for (Eigen::Index k = 0; k < psi.size(); ++k) {
    const double v = psi(k);
    const bool first = k == 0;
    if (first)
      std::snprintf(buf, sizeof buf, " %.3f", v);
    else
      std::snprintf(buf, sizeof buf, " %s %.3f", v < 0 ? "-" : "+", std::abs(v));
    s += buf;
    const ColumnSpec& c = blip[static_cast<std::size_t>(k)];
    if (!c.is_intercept()) s += "\xC2\xB7" + c.label;  // ·
  }
  return s + " > 0";
}

namespace {

std::string parameter_name(const ColumnSpec& c) {
  return "psi[" + (c.is_intercept() ? std::string("intercept") : c.label) + "]";
}

void add_records(SensitivityReport& report, const SensitivityRow& row, const StageModel& model,
                 const std::optional<BootstrapResult>& boot) {
  for (std::size_t k = 0; k < model.blip_size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    SensitivityRecord r;
    r.method = row.method;
    r.gamma = row.gamma;
    r.parameter = parameter_name(model.blip_columns[k]);
    r.estimate = model.psi(i);
    if (boot) {
      r.se = boot->se(i);
      r.ci_low = boot->lower(i);
      r.ci_high = boot->upper(i);
    }
    report.records.push_back(std::move(r));
  }
}

}  // namespace

SensitivityReport run_sensitivity(const AnalysisConfig& config, const StudyDataset& input) {
  config.validate();
  if (config.stages.size() != 1 || input.two_stage())
    throw ConfigError("sensitivity analysis supports one-stage data only");

  SensitivityReport report;
  StudyDataset data = input;
  if (!config.standardize_columns.empty()) {
    StandardizedDataset sd = standardize_columns(input, config.standardize_columns);
    for (const auto& t : sd.transforms) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "standardized '%s': mean %.6g, sd %.6g", t.name.c_str(),
                    t.mean, t.scale);
      report.log.emplace_back(buf);
    }
    data = std::move(sd.dataset);
  }

  const Schema& schema = data.schema();
  QLearnSpec spec;
  spec.last = StageModel(parse_columns(config.stages[0].treatment_free, schema),
                         parse_columns(config.stages[0].blip, schema));

  auto fit_point = [&](Method method, std::optional<MisclassRates> gamma) {
    SensitivityRow row;
    row.method = std::string(to_string(method));
    row.gamma = gamma;
    try {
      QLearnOptions opts;
      opts.fixed_rates = gamma;
      const QLearnFit fit = fit_qlearning(data, spec, method, opts);
      if (!fit.converged)
        throw NumericalError(fit.separation ? "separation detected" : "fit did not converge");
      std::optional<BootstrapResult> boot;
      if (config.bootstrap_samples > 0) {
        QLearnOptions warm = opts;
        if (fit.mle) warm.mle_start = fit.mle->params;
        const Estimator refit =
            [&](const StudyDataset& resample) -> std::optional<Eigen::VectorXd> {
          const QLearnFit f = fit_qlearning(resample, spec, method, warm);
          if (!f.converged) return std::nullopt;
          return f.blip_estimates();
        };
        // every grid point sees the same resamples
        Stream rng(config.seed, 0, Purpose::bootstrap);
        boot = bootstrap_ci(data, refit, config.bootstrap_samples, rng, /*stratified=*/false);
        row.bootstrap_failures = boot->failures;
      }
      row.rule = render_rule(fit.last.psi, fit.last.blip_columns);
      add_records(report, row, fit.last, boot);
    } catch (const std::runtime_error& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  };

  fit_point(Method::naive, std::nullopt);
  for (const auto& g : config.gamma_grid) fit_point(Method::mle_corrected, g);
  return report;
}

SensitivityReport run_sensitivity(const AnalysisConfig& config) {
  config.validate();
  IngestResult in = ingest_csv(config.input_path, config.ingest_spec());
  SensitivityReport report = run_sensitivity(config, in.dataset);
  report.log.insert(report.log.begin(), in.log.begin(), in.log.end());
  return report;
}

}  // namespace dtrmis::cli
