#include "dtrmis/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>

namespace dtrmis {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::one_stage: return "one_stage";
    case Scenario::two_stage: return "two_stage";
    case Scenario::predictive: return "predictive";
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "one_stage") return Scenario::one_stage;
  if (text == "two_stage") return Scenario::two_stage;
  if (text == "predictive") return Scenario::predictive;
  throw ConfigError("unknown scenario '" + std::string(text) + "'");
}

void ScenarioConfig::validate() const {
  if (n < 2) throw ConfigError("n must be at least 2");
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in (0, 1]");
  if (std::llround(rho * static_cast<double>(n)) < 1)
    throw ConfigError("rho * n must round to at least one validation row");
  if (replications < 1) throw ConfigError("replications must be at least 1");
  if (bootstrap_samples != 0 && bootstrap_samples < 50)
    throw ConfigError("bootstrap_samples must be 0 or at least 50");
  if (scenario == Scenario::predictive && test_n < 1)
    throw ConfigError("predictive scenario needs test_n >= 1");
}

// ---- data-generating models ------------------------------------------------

namespace {

ColumnSpec col(std::string_view text, const Schema& schema) { return parse_column(text, schema); }

std::vector<ColumnSpec> cols(std::initializer_list<std::string_view> texts,
                             const Schema& schema) {
  std::vector<ColumnSpec> out;
  for (auto t : texts) out.push_back(col(t, schema));
  return out;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Schema one_stage_schema() {
  Schema s;
  s.stage1_names = {"X", "Z"};
  s.treatment1_name = "A";
  return s;
}

Schema two_stage_schema() {
  Schema s;
  s.stage1_names = {"X1", "Z1"};
  s.stage2_names = {"X2", "Z2"};
  s.two_stage = true;
  return s;
}

Schema sensitivity_schema() {
  Schema s;
  s.stage1_names = {"Age", "Diabetes", "SmokeIntensity"};
  s.treatment1_name = "A";
  return s;
}

// two-stage law
constexpr double kEta0 = -0.5, kEta1 = 0.5;
constexpr double kZeta0 = -0.8, kZeta1 = 1.25;
constexpr double kDelta1 = 0.1, kDelta2 = 0.1;

double z2_probability(double z1, int a1) { return expit(kDelta1 * z1 + kDelta2 * a1); }

}  // namespace

QLearnSpec one_stage_truth() {
  const Schema s = one_stage_schema();
  QLearnSpec spec;
  spec.last = StageModel(cols({"1", "Z", "X"}, s), cols({"1", "X"}, s), vec({1.0, 0.5, -1.0}),
                         vec({0.5, -0.5}));
  return spec;
}

StudyDataset generate_one_stage(std::size_t n, const MisclassRates& rates, Stream& data,
                                Stream& corruption) {
  const StageModel truth = one_stage_truth().last;
  std::vector<Trajectory> rows(n);
  for (auto& t : rows) {
    const double x = data.normal(1.0, 1.0);
    const double z = data.sign(0.5);
    t.stage1_covariates = {x, z};
    t.treatment1 = data.sign(expit(1.0 - x));
    const Eigen::VectorXd h0 = vec({1.0, z, x});
    const Eigen::VectorXd h1 = vec({1.0, x});
    const int y = data.bernoulli(q2_probability(h0, h1, t.treatment1, truth)) ? 1 : 0;
    t.true_outcome = y;
    t.surrogate_outcome = corrupt_outcome(y, rates, corruption.uniform());
  }
  return StudyDataset(one_stage_schema(), std::move(rows), n);
}

QLearnSpec two_stage_truth() {
  const Schema s = two_stage_schema();
  QLearnSpec spec;
  spec.last = StageModel(cols({"1", "X1", "Z1", "A1", "Z1*A1", "X2"}, s),
                         cols({"1", "Z2", "A1"}, s), vec({0.0, 1.0, 0.0, -0.5, 0.0, 1.0}),
                         vec({0.25, 0.5, 0.5}));
  const Eigen::VectorXd& b = spec.last.beta;
  const Eigen::VectorXd& p = spec.last.psi;

  // E[pseudo-outcome | X1, Z1, A1] = (b1 + b5 eta1) X1 + m(Z1, A1), exactly
  // linear in the stage-1 design (1, X1, Z1) + (1, Z1) A1, so the population
  // least-squares fit reproduces it whatever the covariate distribution.
  auto m = [&](double z1, int a1) {
    const double pz = z2_probability(z1, a1);
    double blip = 0.0;
    for (double z2 : {1.0, -1.0}) {
      const double w = z2 > 0 ? pz : 1.0 - pz;
      blip += w * std::abs(p(0) + p(1) * z2 + p(2) * a1);
    }
    return b(0) + b(2) * z1 + b(3) * a1 + b(4) * z1 * a1 + b(5) * kEta0 + blip;
  };
  const double mpp = m(1, 1), mmp = m(-1, 1), mpm = m(1, -1), mmm = m(-1, -1);
  const Eigen::VectorXd beta1 =
      vec({(mpp + mmp + mpm + mmm) / 4.0, b(1) + b(5) * kEta1, (mpp - mmp + mpm - mmm) / 4.0});
  const Eigen::VectorXd psi1 = vec({(mpp + mmp - mpm - mmm) / 4.0, (mpp - mmp - mpm + mmm) / 4.0});
  spec.first = StageModel(cols({"1", "X1", "Z1"}, s), cols({"1", "Z1"}, s), beta1, psi1);
  return spec;
}

StudyDataset generate_two_stage(std::size_t n, const MisclassRates& rates, Stream& data,
                                Stream& corruption) {
  const StageModel truth = two_stage_truth().last;
  std::vector<Trajectory> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    Trajectory& t = rows[i];
    const double x1 = data.normal();
    const double z1 = data.sign(0.5);
    t.treatment1 = data.sign(expit(kZeta0 + kZeta1 * x1));
    const double x2 = data.normal(kEta0 + kEta1 * x1, 1.0);
    const double z2 = data.sign(z2_probability(z1, t.treatment1));
    t.treatment2 = data.sign(expit(kZeta0 + kZeta1 * x2));
    t.stage1_covariates = {x1, z1};
    t.stage2_covariates = {x2, z2};
    const double p = q2_probability(history_row(t, truth.treatment_free_columns, i),
                                    history_row(t, truth.blip_columns, i), *t.treatment2, truth);
    const int y = data.bernoulli(p) ? 1 : 0;
    t.true_outcome = y;
    t.surrogate_outcome = corrupt_outcome(y, rates, corruption.uniform());
  }
  return StudyDataset(two_stage_schema(), std::move(rows), n);
}

Trajectory two_stage_counterfactual(const Trajectory& observed, int a1, Stream& rng) {
  Trajectory t = observed;
  if (a1 == observed.treatment1) return t;
  t.treatment1 = a1;
  t.stage2_covariates.at(1) = rng.sign(z2_probability(observed.stage1_covariates.at(1), a1));
  return t;
}

QLearnSpec sensitivity_truth() {
  const Schema s = sensitivity_schema();
  QLearnSpec spec;
  spec.last = StageModel(cols({"1", "Age", "Diabetes", "SmokeIntensity"}, s),
                         cols({"1", "Diabetes", "SmokeIntensity"}, s),
                         vec({-0.5, 0.4, 0.3, 0.2}), vec({-0.3, 0.6, 0.4}));
  return spec;
}

StudyDataset generate_sensitivity_data(std::size_t n, const MisclassRates& rates,
                                       Stream& data, Stream& corruption) {
  const StageModel truth = sensitivity_truth().last;
  std::vector<Trajectory> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    Trajectory& t = rows[i];
    const double age = data.normal();
    const double diabetes = data.bernoulli(0.3) ? 1.0 : 0.0;
    const double smoke = data.normal();
    t.stage1_covariates = {age, diabetes, smoke};
    t.treatment1 = data.sign(expit(-0.2 + 0.5 * diabetes + 0.3 * smoke));
    const double p = q2_probability(history_row(t, truth.treatment_free_columns, i),
                                    history_row(t, truth.blip_columns, i), t.treatment1, truth);
    const int y = data.bernoulli(p) ? 1 : 0;
    t.true_outcome = y;
    t.surrogate_outcome = corrupt_outcome(y, rates, corruption.uniform());
  }
  return StudyDataset(sensitivity_schema(), std::move(rows), 0);
}

StudyDataset split_validation(const StudyDataset& dataset, double rho, Stream& rng) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in (0, 1]");
  const std::size_t n = dataset.size();
  const auto nv = static_cast<std::size_t>(std::llround(rho * static_cast<double>(n)));

  // partial Fisher-Yates picks the validation indices
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < nv; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  std::vector<char> in_v(n, 0);
  for (std::size_t i = 0; i < nv; ++i) in_v[idx[i]] = 1;

  std::vector<Trajectory> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (in_v[i]) {
      if (!dataset[i].true_outcome || !dataset[i].surrogate_outcome)
        throw DataError("trajectory " + std::to_string(i) +
                        " cannot join the validation subset without both outcomes");
      rows.push_back(dataset[i]);
    }
  for (std::size_t i = 0; i < n; ++i)
    if (!in_v[i]) {
      rows.push_back(dataset[i]);
      rows.back().true_outcome.reset();
    }
  return StudyDataset(dataset.schema(), std::move(rows), nv);
}

// ---- bootstrap ---------------------------------------------------------------

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapResult bootstrap_ci(const StudyDataset& dataset, const Estimator& estimator,
                             std::size_t samples, Stream& rng, bool stratified, double level) {
  if (samples < 50) throw ConfigError("bootstrap needs at least 50 samples");
  if (dataset.empty()) throw DataError("cannot bootstrap an empty dataset");
  const std::size_t n = dataset.size();
  const std::size_t nv = stratified ? dataset.validation_count() : 0;

  std::vector<Eigen::VectorXd> draws;
  draws.reserve(samples);
  BootstrapResult out;
  out.samples = samples;
  std::vector<Trajectory> rows(n);
  for (std::size_t b = 0; b < samples; ++b) {
    for (std::size_t i = 0; i < nv; ++i) rows[i] = dataset[rng.below(nv)];
    for (std::size_t i = nv; i < n; ++i) rows[i] = dataset[nv + rng.below(n - nv)];
    std::optional<Eigen::VectorXd> est;
    try {
      std::vector<Trajectory> copy = rows;
      est = estimator(StudyDataset(dataset.schema(), std::move(copy),
                                   stratified ? nv : dataset.validation_count()));
    } catch (const std::runtime_error&) {
      est.reset();
    }
    if (est)
      draws.push_back(std::move(*est));
    else
      ++out.failures;
  }
  if (static_cast<double>(out.failures) > 0.2 * static_cast<double>(samples))
    throw NumericalError("bootstrap: " + std::to_string(out.failures) + " of " +
                         std::to_string(samples) + " refits failed");

  const Eigen::Index p = draws.front().size();
  out.lower.resize(p);
  out.upper.resize(p);
  out.se.resize(p);
  const double alpha = (1.0 - level) / 2.0;
  std::vector<double> coord(draws.size());
  for (Eigen::Index k = 0; k < p; ++k) {
    double mean = 0.0;
    for (std::size_t b = 0; b < draws.size(); ++b) {
      coord[b] = draws[b](k);
      mean += coord[b];
    }
    mean /= static_cast<double>(draws.size());
    double ss = 0.0;
    for (double v : coord) ss += (v - mean) * (v - mean);
    out.se(k) = draws.size() > 1 ? std::sqrt(ss / static_cast<double>(draws.size() - 1)) : 0.0;
    out.lower(k) = quantile(coord, alpha);
    out.upper(k) = quantile(coord, 1.0 - alpha);
  }
  return out;
}

// ---- replication harness -----------------------------------------------------

const ParameterSummary& ReplicationSummary::at(std::string_view name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p;
  throw std::out_of_range("no parameter named " + std::string(name));
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DTRMIS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Runs body(i) for i in [0, count); results are written by index, so the
// outcome does not depend on the thread count.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body body) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct Draw {
  std::optional<Eigen::VectorXd> estimate;
  std::vector<char> covered;  // empty without bootstrap
  bool separation = false;
  std::optional<MisclassRates> gamma;
};

StudyDataset training_data(const ScenarioConfig& c, std::size_t rep) {
  Stream data(c.seed, rep, Purpose::generate);
  Stream corruption(c.seed, rep, Purpose::corrupt);
  Stream split(c.seed, rep, Purpose::split);
  const StudyDataset full = c.scenario == Scenario::one_stage
                                ? generate_one_stage(c.n, c.rates, data, corruption)
                                : generate_two_stage(c.n, c.rates, data, corruption);
  return split_validation(full, c.rho, split);
}

QLearnSpec scenario_truth(Scenario s) {
  return s == Scenario::one_stage ? one_stage_truth() : two_stage_truth();
}

std::optional<QLearnFit> try_fit(const StudyDataset& data, const QLearnSpec& spec, Method m,
                                 const QLearnOptions& options = {}) {
  try {
    QLearnFit fit = fit_qlearning(data, spec, m, options);
    if (!fit.converged) return std::nullopt;
    return fit;
  } catch (const std::runtime_error&) {
    return std::nullopt;
  }
}

Draw one_draw(const ScenarioConfig& c, std::size_t rep, const StudyDataset& data,
              const QLearnSpec& spec, const Eigen::VectorXd& truth, Method m, double level) {
  Draw d;
  const auto fit = try_fit(data, spec, m);
  if (!fit) return d;
  d.separation = fit->separation;
  if (m == Method::mle_corrected && fit->mle)
    d.gamma = MisclassRates::admissible(fit->mle->params.gamma10(), fit->mle->params.gamma01())
                  ? std::optional<MisclassRates>(MisclassRates(fit->mle->params.gamma10(),
                                                               fit->mle->params.gamma01()))
                  : std::nullopt;
  if (c.bootstrap_samples > 0) {
    QLearnOptions warm;
    if (fit->mle) warm.mle_start = fit->mle->params;
    const Estimator refit = [&](const StudyDataset& resample) -> std::optional<Eigen::VectorXd> {
      const auto f = try_fit(resample, spec, m, warm);
      if (!f) return std::nullopt;
      return f->blip_estimates();
    };
    // same key for every method: all estimators see identical resamples
    Stream boot(c.seed, rep, Purpose::bootstrap);
    try {
      const BootstrapResult ci = bootstrap_ci(data, refit, c.bootstrap_samples, boot, true, level);
      d.covered.resize(static_cast<std::size_t>(truth.size()));
      for (Eigen::Index k = 0; k < truth.size(); ++k)
        d.covered[static_cast<std::size_t>(k)] = ci.lower(k) <= truth(k) && truth(k) <= ci.upper(k);
    } catch (const NumericalError&) {
      return d;  // counted as a failed replication
    }
  }
  d.estimate = fit->blip_estimates();
  return d;
}

ReplicationSummary summarize(const std::vector<Draw>& draws, const std::vector<std::string>& names,
                             const Eigen::VectorXd& truth, bool with_coverage) {
  ReplicationSummary s;
  const auto p = static_cast<std::size_t>(truth.size());
  std::vector<double> sum(p, 0.0), covered(p, 0.0);
  double g10 = 0.0, g01 = 0.0;
  std::size_t gammas = 0;
  for (const Draw& d : draws) {
    if (!d.estimate) {
      ++s.failure_count;
      continue;
    }
    s.estimates.push_back(*d.estimate);
    s.separation_count += d.separation;
    for (std::size_t k = 0; k < p; ++k) {
      sum[k] += (*d.estimate)(static_cast<Eigen::Index>(k));
      if (with_coverage) covered[k] += d.covered[k];
    }
    if (d.gamma) {
      g10 += d.gamma->gamma10();
      g01 += d.gamma->gamma01();
      ++gammas;
    }
  }
  s.replications = s.estimates.size();
  if (gammas > 0) {
    s.gamma10_mean = g10 / static_cast<double>(gammas);
    s.gamma01_mean = g01 / static_cast<double>(gammas);
  }
  const double r = static_cast<double>(s.replications);
  for (std::size_t k = 0; k < p; ++k) {
    ParameterSummary ps;
    ps.name = names[k];
    ps.truth = truth(static_cast<Eigen::Index>(k));
    if (s.replications > 0) {
      ps.mean = sum[k] / r;
      ps.bias = ps.mean - ps.truth;
      double ss = 0.0, sq = 0.0;
      for (const auto& e : s.estimates) {
        const double v = e(static_cast<Eigen::Index>(k));
        ss += (v - ps.mean) * (v - ps.mean);
        sq += (v - ps.truth) * (v - ps.truth);
      }
      ps.se = s.replications > 1 ? std::sqrt(ss / (r - 1.0)) : 0.0;
      ps.rmse = std::sqrt(sq / r);
      if (with_coverage) ps.coverage = covered[k] / r;
    }
    s.parameters.push_back(ps);
  }
  return s;
}

}  // namespace

SimulationResults run_replications(const ScenarioConfig& config,
                                   const std::vector<Method>& methods,
                                   const HarnessOptions& options) {
  config.validate();
  if (config.scenario == Scenario::predictive)
    throw ConfigError("run_replications handles the one_stage and two_stage scenarios");
  if (methods.empty()) throw ConfigError("no methods requested");

  const QLearnSpec spec = scenario_truth(config.scenario);
  QLearnFit truth_fit;
  truth_fit.last = spec.last;
  truth_fit.first = spec.first;
  const Eigen::VectorXd truth = truth_fit.blip_estimates();
  const std::vector<std::string> names = blip_names(spec);

  const std::size_t reps = config.replications;
  std::vector<std::vector<Draw>> draws(methods.size(), std::vector<Draw>(reps));
  parallel_for(reps, resolve_threads(options.threads), [&](std::size_t rep) {
    const StudyDataset data = training_data(config, rep);
    for (std::size_t j = 0; j < methods.size(); ++j)
      draws[j][rep] = one_draw(config, rep, data, spec, truth, methods[j], options.level);
  });

  SimulationResults results;
  std::string failed;
  for (std::size_t j = 0; j < methods.size(); ++j) {
    ReplicationSummary s = summarize(draws[j], names, truth, config.bootstrap_samples > 0);
    if (static_cast<double>(s.failure_count) > options.failure_limit * static_cast<double>(reps))
      failed += " " + std::string(to_string(methods[j])) + " (" +
                std::to_string(s.failure_count) + "/" + std::to_string(reps) + ")";
    results[methods[j]] = std::move(s);
  }
  if (!failed.empty())
    throw ReplicationFailure("too many failed replications:" + failed, std::move(results));
  return results;
}

PredictiveResults run_predictive(const ScenarioConfig& config,
                                 const std::vector<Method>& methods,
                                 const PredictionOptions& prediction,
                                 const HarnessOptions& options) {
  config.validate();
  if (config.scenario != Scenario::predictive)
    throw ConfigError("run_predictive needs the predictive scenario");
  if (methods.empty()) throw ConfigError("no methods requested");

  const QLearnSpec spec = two_stage_truth();
  const std::size_t reps = config.replications;
  std::vector<std::vector<std::optional<PredictionMetrics>>> metrics(
      methods.size(), std::vector<std::optional<PredictionMetrics>>(reps));

  parallel_for(reps, resolve_threads(options.threads), [&](std::size_t rep) {
    Stream data(config.seed, rep, Purpose::generate);
    Stream corruption(config.seed, rep, Purpose::corrupt);
    Stream split(config.seed, rep, Purpose::split);
    const StudyDataset train =
        split_validation(generate_two_stage(config.n, config.rates, data, corruption),
                         config.rho, split);
    Stream test_data(config.seed, rep, Purpose::test_data);
    Stream test_noise(config.seed, rep, Purpose::test_data, 1);
    const StudyDataset test =
        generate_two_stage(config.test_n, MisclassRates(), test_data, test_noise);
    for (std::size_t j = 0; j < methods.size(); ++j) {
      const auto fit = try_fit(train, spec, methods[j]);
      if (!fit) continue;
      Stream eval(config.seed, rep, Purpose::evaluate, static_cast<std::uint64_t>(methods[j]));
      metrics[j][rep] =
          evaluate_predictions(*fit, spec, test, two_stage_counterfactual, eval, prediction);
    }
  });

  PredictiveResults results;
  for (std::size_t j = 0; j < methods.size(); ++j) {
    PredictiveSummary s;
    for (const auto& m : metrics[j]) {
      if (!m) {
        ++s.failure_count;
        continue;
      }
      ++s.replications;
      s.mean.regime_accuracy_stage2 += m->regime_accuracy_stage2;
      s.mean.regime_accuracy_stage1 += m->regime_accuracy_stage1;
      s.mean.regime_accuracy_both += m->regime_accuracy_both;
      s.mean.outcome_error_rate += m->outcome_error_rate;
      s.mean.sensitivity += m->sensitivity;
      s.mean.specificity += m->specificity;
    }
    if (s.replications > 0) {
      const double r = static_cast<double>(s.replications);
      s.mean.regime_accuracy_stage2 /= r;
      s.mean.regime_accuracy_stage1 /= r;
      s.mean.regime_accuracy_both /= r;
      s.mean.outcome_error_rate /= r;
      s.mean.sensitivity /= r;
      s.mean.specificity /= r;
    }
    results[methods[j]] = s;
  }
  return results;
}

}  // namespace dtrmis
