#include "dtrmis/qlearn.hpp"

#include <cmath>
#include <string>

namespace dtrmis {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::validation_only: return "validation_only";
    case Method::naive: return "naive";
    case Method::mle_corrected: return "mle_corrected";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  if (text == "validation_only" || text == "validation" || text == "v")
    return Method::validation_only;
  if (text == "naive" || text == "n") return Method::naive;
  if (text == "mle_corrected" || text == "mle" || text == "corrected")
    return Method::mle_corrected;
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

Eigen::VectorXd QLearnFit::blip_estimates() const {
  const Eigen::Index extra = first ? first->psi.size() : 0;
  Eigen::VectorXd out(last.psi.size() + extra);
  out.head(last.psi.size()) = last.psi;
  if (first) out.tail(extra) = first->psi;
  return out;
}

Regime QLearnFit::regime() const {
  if (first) return Regime(*first, last);
  return Regime(last);
}

std::vector<std::string> blip_names(const QLearnSpec& spec) {
  std::vector<std::string> names;
  const int last_index = spec.two_stage() ? 2 : 1;
  for (std::size_t k = 0; k < spec.last.blip_size(); ++k)
    names.push_back("psi" + std::to_string(last_index) + std::to_string(k));
  if (spec.first)
    for (std::size_t k = 0; k < spec.first->blip_size(); ++k)
      names.push_back("psi1" + std::to_string(k));
  return names;
}

double q2_probability(const Eigen::VectorXd& h0, const Eigen::VectorXd& h1, int a,
                      const StageModel& model) {
  if (h0.size() != model.beta.size() || h1.size() != model.psi.size())
    throw std::invalid_argument("history dimensions do not match the stage model");
  return expit(model.beta.dot(h0) + model.psi.dot(h1) * a);
}

double pseudo_outcome(const StageModel& model, const Eigen::VectorXd& h0,
                      const Eigen::VectorXd& h1) {
  if (h0.size() != model.beta.size() || h1.size() != model.psi.size())
    throw std::invalid_argument("history dimensions do not match the stage model");
  return model.beta.dot(h0) + std::abs(model.psi.dot(h1));
}

namespace {

std::string context(int stage, Method method) {
  return "stage " + std::to_string(stage) + " (" + std::string(to_string(method)) + "): ";
}

// Rethrows the active exception with the stage/method prefix, keeping its category.
[[noreturn]] void rethrow_annotated(int stage, Method method) {
  try {
    throw;
  } catch (const IdentifiabilityError& e) {
    throw IdentifiabilityError(context(stage, method) + e.what());
  } catch (const DataError& e) {
    throw DataError(context(stage, method) + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(context(stage, method) + e.what());
  }
}

Eigen::VectorXd outcome_vector(const StudyDataset& data, std::size_t rows, bool surrogate) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& o = surrogate ? data[i].surrogate_outcome : data[i].true_outcome;
    if (!o)
      throw DataError("trajectory " + std::to_string(i) + " lacks the " +
                      (surrogate ? "surrogate" : "true") + " outcome");
    y(static_cast<Eigen::Index>(i)) = *o;
  }
  return y;
}

}  // namespace

QLearnFit fit_qlearning(const StudyDataset& dataset, const QLearnSpec& spec, Method method,
                        const QLearnOptions& options) {
  if (spec.two_stage() != dataset.two_stage())
    throw DataError("model specification and dataset disagree on the number of stages");

  QLearnFit fit;
  fit.method = method;
  const int last_index = spec.two_stage() ? 2 : 1;
  std::size_t used_rows = dataset.size();

  try {
    const DesignRows rows = build_design_rows(dataset, spec.last, spec.last_stage());
    switch (method) {
      case Method::naive: {
        const GlmFit g =
            fit_logistic(rows.full(), outcome_vector(dataset, dataset.size(), true), options.glm);
        fit.last = spec.last.with_coefficients(g.coefficients);
        fit.converged = g.converged && !g.separation_flag;
        fit.separation = g.separation_flag;
        fit.glm = g;
        break;
      }
      case Method::validation_only: {
        used_rows = dataset.validation_count();
        if (used_rows == 0) throw DataError("validation-only fit needs validation rows");
        const auto nv = static_cast<Eigen::Index>(used_rows);
        const GlmFit g = fit_logistic(rows.full().topRows(nv),
                                      outcome_vector(dataset, used_rows, false), options.glm);
        fit.last = spec.last.with_coefficients(g.coefficients);
        fit.converged = g.converged && !g.separation_flag;
        fit.separation = g.separation_flag;
        fit.glm = g;
        break;
      }
      case Method::mle_corrected: {
        MleOptions mo = options.mle;
        if (options.fixed_rates) mo.fixed_rates = options.fixed_rates;
        MleFit m;
        if (options.mle_start) {
          MisLikParams init = *options.mle_start;
          if (mo.fixed_rates) init = MisLikParams::fixed(init.beta, init.psi, *mo.fixed_rates);
          m = fit_mle(dataset, spec.last, spec.last_stage(), init, mo);
        } else {
          m = fit_mle(dataset, spec.last, spec.last_stage(), mo);
        }
        fit.last = spec.last.with_coefficients(m.params.coefficients());
        fit.converged = m.converged;
        if (!m.params.gamma_fixed() &&
            MisclassRates::admissible(m.params.gamma10(), m.params.gamma01()))
          fit.gamma_estimates = MisclassRates(m.params.gamma10(), m.params.gamma01());
        else if (m.params.gamma_fixed())
          fit.gamma_estimates = *m.params.fixed_rates;
        fit.mle = m;
        break;
      }
    }
  } catch (...) {
    rethrow_annotated(last_index, method);
  }

  if (spec.first) {
    try {
      const DesignRows last_rows = build_design_rows(dataset, fit.last, Stage::two);
      const auto m = static_cast<Eigen::Index>(used_rows);
      Eigen::VectorXd pseudo(m);
      for (Eigen::Index i = 0; i < m; ++i)
        pseudo(i) = fit.last.beta.dot(last_rows.treatment_free.row(i)) +
                    std::abs(fit.last.psi.dot(last_rows.blip.row(i)));
      const DesignRows first_rows = build_design_rows(dataset, *spec.first, Stage::one);
      const Eigen::VectorXd coef = fit_ols(first_rows.full().topRows(m), pseudo);
      fit.first = spec.first->with_coefficients(coef);
    } catch (...) {
      rethrow_annotated(1, method);
    }
  }
  return fit;
}

PredictionMetrics evaluate_predictions(const QLearnFit& fit, const QLearnSpec& truth,
                                       const StudyDataset& test,
                                       const CounterfactualGenerator& counterfactual,
                                       Stream& rng, const PredictionOptions& options) {
  if (!fit.first || !truth.first || !test.two_stage())
    throw DataError("prediction metrics need a two-stage fit, truth, and test data");
  if (!counterfactual) throw DataError("missing counterfactual generator for test outcomes");
  if (test.empty()) throw DataError("empty test dataset");

  const StageModel& est1 = *fit.first;
  const StageModel& est2 = fit.last;
  const StageModel& true1 = *truth.first;
  const StageModel& true2 = truth.last;

  std::size_t ok1 = 0, ok2 = 0, ok_both = 0, wrong = 0;
  std::size_t pos = 0, true_pos = 0, neg = 0, true_neg = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Trajectory& t = test[i];
    const int a1_hat = optimal_action(est1.psi, history_row(t, est1.blip_columns, i));
    const int a1_opt = optimal_action(true1.psi, history_row(t, true1.blip_columns, i));
    const int a2_hat = optimal_action(est2.psi, history_row(t, est2.blip_columns, i));
    const int a2_opt = optimal_action(true2.psi, history_row(t, true2.blip_columns, i));
    const bool s1 = a1_hat == a1_opt;
    const bool s2 = a2_hat == a2_opt;
    ok1 += s1;
    ok2 += s2;
    ok_both += s1 && s2;

    // roll forward under the estimated regime
    const Trajectory cf = counterfactual(t, a1_hat, rng);
    const Eigen::VectorXd h20 = history_row(cf, est2.treatment_free_columns, i);
    const Eigen::VectorXd h21 = history_row(cf, est2.blip_columns, i);
    const int a2 = optimal_action(est2.psi, h21);
    const bool predicted = q2_probability(h20, h21, a2, est2) > options.threshold;
    const double p_true = q2_probability(history_row(cf, true2.treatment_free_columns, i),
                                         history_row(cf, true2.blip_columns, i), a2, true2);
    const bool actual = options.reference == OutcomeReference::true_probability
                            ? p_true > options.threshold
                            : rng.bernoulli(p_true);
    wrong += predicted != actual;
    if (actual) {
      ++pos;
      true_pos += predicted;
    } else {
      ++neg;
      true_neg += !predicted;
    }
  }

  const double n = static_cast<double>(test.size());
  PredictionMetrics m;
  m.regime_accuracy_stage1 = ok1 / n;
  m.regime_accuracy_stage2 = ok2 / n;
  m.regime_accuracy_both = ok_both / n;
  m.outcome_error_rate = wrong / n;
  m.sensitivity = pos ? static_cast<double>(true_pos) / pos : 1.0;
  m.specificity = neg ? static_cast<double>(true_neg) / neg : 1.0;
  return m;
}

}  // namespace dtrmis
