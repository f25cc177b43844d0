#include "dtrmis/mislik.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dtrmis {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

MisLikParams MisLikParams::free(Eigen::VectorXd beta, Eigen::VectorXd psi, double gamma10,
                                double gamma01) {
  if (!(gamma10 > 0.0 && gamma10 < 1.0 && gamma01 > 0.0 && gamma01 < 1.0))
    throw std::invalid_argument("free misclassification rates must lie in (0, 1)");
  MisLikParams p;
  p.beta = std::move(beta);
  p.psi = std::move(psi);
  p.gamma10_logit = logit(gamma10);
  p.gamma01_logit = logit(gamma01);
  return p;
}

MisLikParams MisLikParams::fixed(Eigen::VectorXd beta, Eigen::VectorXd psi,
                                 MisclassRates rates) {
  MisLikParams p;
  p.beta = std::move(beta);
  p.psi = std::move(psi);
  p.fixed_rates = rates;
  return p;
}

double MisLikParams::gamma10() const {
  return fixed_rates ? fixed_rates->gamma10() : expit(gamma10_logit);
}

double MisLikParams::gamma01() const {
  return fixed_rates ? fixed_rates->gamma01() : expit(gamma01_logit);
}

Eigen::Index MisLikParams::size() const {
  return beta.size() + psi.size() + (gamma_fixed() ? 0 : 2);
}

Eigen::VectorXd MisLikParams::to_vector() const {
  Eigen::VectorXd v(size());
  v.head(beta.size()) = beta;
  v.segment(beta.size(), psi.size()) = psi;
  if (!gamma_fixed()) {
    v(beta.size() + psi.size()) = gamma10_logit;
    v(beta.size() + psi.size() + 1) = gamma01_logit;
  }
  return v;
}

MisLikParams MisLikParams::with_vector(const Eigen::VectorXd& v) const {
  if (v.size() != size()) throw std::invalid_argument("parameter vector has the wrong length");
  MisLikParams p = *this;
  p.beta = v.head(beta.size());
  p.psi = v.segment(beta.size(), psi.size());
  if (!gamma_fixed()) {
    p.gamma10_logit = v(beta.size() + psi.size());
    p.gamma01_logit = v(beta.size() + psi.size() + 1);
  }
  return p;
}

Eigen::VectorXd MisLikParams::coefficients() const {
  Eigen::VectorXd c(beta.size() + psi.size());
  c << beta, psi;
  return c;
}

double surrogate_prob(double p_true, const MisclassRates& rates) {
  return rates.gamma10() + rates.margin() * p_true;
}

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

MisLikelihood::MisLikelihood(const StudyDataset& dataset, DesignRows design,
                             LikelihoodOptions options)
    : design_(design.full()),
      surrogate_(static_cast<Eigen::Index>(dataset.size())),
      truth_(static_cast<Eigen::Index>(dataset.validation_count())),
      validation_count_(static_cast<Eigen::Index>(dataset.validation_count())),
      options_(options) {
  if (design_.rows() != static_cast<Eigen::Index>(dataset.size()))
    throw std::invalid_argument("design rows do not match the dataset");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Trajectory& t = dataset[i];
    if (!t.surrogate_outcome)
      throw DataError("trajectory " + std::to_string(i) + " has no surrogate outcome");
    surrogate_(static_cast<Eigen::Index>(i)) = *t.surrogate_outcome;
    if (i < dataset.validation_count())
      truth_(static_cast<Eigen::Index>(i)) = *t.true_outcome;
  }
}

LikelihoodEvaluation MisLikelihood::evaluate(const MisLikParams& params,
                                             bool with_gradient) const {
  const Eigen::Index nb = params.beta.size() + params.psi.size();
  if (nb != design_.cols())
    throw std::invalid_argument("parameter dimension does not match the design");

  const double g10 = params.gamma10();
  const double g01 = params.gamma01();
  const double m = 1.0 - g10 - g01;
  const Eigen::VectorXd eta = design_ * params.coefficients();

  LikelihoodEvaluation out;
  Eigen::VectorXd d_eta;
  if (with_gradient) d_eta.resize(eta.size());
  double d_g10 = 0.0, d_g01 = 0.0;

  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double p = expit(eta(i));
    const double q = expit(-eta(i));
    const bool ys = surrogate_(i) > 0.5;
    double arg, de, dg10 = 0.0, dg01 = 0.0;
    if (i < validation_count_) {
      const bool y = truth_(i) > 0.5;
      if (ys && y) {
        arg = (1.0 - g01) * p;
        de = q;
        dg01 = -1.0 / (1.0 - g01);
      } else if (ys) {
        arg = g10 * q;
        de = -p;
        dg10 = 1.0 / g10;
      } else if (y) {
        arg = g01 * p;
        de = q;
        dg01 = 1.0 / g01;
      } else {
        arg = (1.0 - g10) * q;
        de = -p;
        dg10 = -1.0 / (1.0 - g10);
      }
    } else if (ys) {
      arg = g10 + m * p;
      de = m * p * q / arg;
      dg10 = q / arg;
      dg01 = -p / arg;
    } else {
      arg = g01 + m * q;
      de = -m * p * q / arg;
      dg10 = -q / arg;
      dg01 = p / arg;
    }

    if (!(arg >= options_.log_floor)) {
      if (options_.strict)
        throw NumericalError("log-likelihood term underflows at row " + std::to_string(i));
      ++out.clamped;
      out.value += std::log(options_.log_floor);
      if (with_gradient) d_eta(i) = 0.0;
      continue;
    }
    out.value += std::log(arg);
    if (with_gradient) {
      d_eta(i) = de;
      d_g10 += dg10;
      d_g01 += dg01;
    }
  }

  if (with_gradient) {
    out.gradient.resize(params.size());
    out.gradient.head(nb) = design_.transpose() * d_eta;
    if (!params.gamma_fixed()) {
      out.gradient(nb) = d_g10 * g10 * (1.0 - g10);
      out.gradient(nb + 1) = d_g01 * g01 * (1.0 - g01);
    }
  }
  return out;
}

double log_likelihood(const MisLikParams& params, const StudyDataset& dataset,
                      const DesignRows& design, const LikelihoodOptions& options) {
  return MisLikelihood(dataset, design, options).evaluate(params, false).value;
}

Eigen::VectorXd log_likelihood_gradient(const MisLikParams& params, const StudyDataset& dataset,
                                        const DesignRows& design,
                                        const LikelihoodOptions& options) {
  return MisLikelihood(dataset, design, options).evaluate(params, true).gradient;
}

// ---------------------------------------------------------------------------
// Maximization
// ---------------------------------------------------------------------------

namespace {

MleFit maximize(const MisLikelihood& lik, const MisLikParams& init, const MleOptions& options) {
  // The optimizer minimizes -logL.
  Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const auto e = lik.evaluate(init.with_vector(x), true);
    g = -e.gradient;
    return -e.value;
  };
  const BfgsResult r = minimize_bfgs(objective, init.to_vector(), options.optimizer);

  MleFit fit;
  fit.params = init.with_vector(r.x);
  const auto e = lik.evaluate(fit.params, false);
  fit.log_likelihood = e.value;
  fit.clamped_terms = e.clamped;
  fit.converged = r.converged;
  fit.iterations = r.iterations;
  fit.gradient_norm = r.gradient_norm;
  fit.monotonicity_violated = !MisclassRates::admissible(fit.params.gamma10(), fit.params.gamma01());
  fit.starts_tried = 1;
  return fit;
}

bool better(const MleFit& a, const MleFit& b) {
  if (a.converged != b.converged) return a.converged;
  return a.log_likelihood > b.log_likelihood;
}

void require_estimable(const StudyDataset& dataset, const MleOptions& options) {
  if (!options.fixed_rates && dataset.validation_count() == 0)
    throw IdentifiabilityError(
        "misclassification rates are not estimable without validation rows; "
        "supply fixed rates");
}

MisLikParams start_from(const Eigen::VectorXd& coef, Eigen::Index nbeta, double g10, double g01,
                        const MleOptions& options) {
  Eigen::VectorXd beta = coef.head(nbeta);
  Eigen::VectorXd psi = coef.tail(coef.size() - nbeta);
  if (options.fixed_rates) return MisLikParams::fixed(beta, psi, *options.fixed_rates);
  return MisLikParams::free(beta, psi, g10, g01);
}

}  // namespace

std::pair<double, double> validation_rate_guess(const StudyDataset& dataset) {
  double n0 = 0, n1 = 0, flip10 = 0, flip01 = 0;
  for (const auto& t : dataset.validation()) {
    if (*t.true_outcome == 0) {
      ++n0;
      if (*t.surrogate_outcome == 1) ++flip10;
    } else {
      ++n1;
      if (*t.surrogate_outcome == 0) ++flip01;
    }
  }
  auto clip = [](double v) { return std::clamp(v, 0.01, 0.49); };
  return {clip(n0 > 0 ? flip10 / n0 : 0.0), clip(n1 > 0 ? flip01 / n1 : 0.0)};
}

MleFit fit_mle(const StudyDataset& dataset, const StageModel& model, Stage stage,
               const MisLikParams& init, const MleOptions& options) {
  require_estimable(dataset, options);
  if (static_cast<std::size_t>(init.beta.size()) != model.treatment_free_size() ||
      static_cast<std::size_t>(init.psi.size()) != model.blip_size())
    throw std::invalid_argument("initial parameters do not match the stage model");
  MisLikelihood lik(dataset, build_design_rows(dataset, model, stage), options.likelihood);
  return maximize(lik, init, options);
}

MleFit fit_mle(const StudyDataset& dataset, const StageModel& model, Stage stage,
               const MleOptions& options) {
  require_estimable(dataset, options);
  const DesignRows rows = build_design_rows(dataset, model, stage);
  MisLikelihood lik(dataset, rows, options.likelihood);
  const auto nbeta = static_cast<Eigen::Index>(model.treatment_free_size());

  std::vector<MisLikParams> starts;
  {
    // (a) naive fit of the surrogate on every row
    GlmFit naive;
    try {
      naive = fit_logistic(lik.design(), lik.surrogate(), options.glm);
    } catch (const NumericalError&) {
      naive.coefficients = Eigen::VectorXd::Zero(lik.design().cols());
    }
    if (naive.separation_flag) naive.coefficients.setZero();
    starts.push_back(start_from(naive.coefficients, nbeta, options.initial_gamma,
                                options.initial_gamma, options));
  }
  if (dataset.validation_count() > 0) {
    // (b) validation-only fit of the true outcome
    try {
      const Eigen::Index nv = lik.validation_count();
      const GlmFit v = fit_logistic(lik.design().topRows(nv), lik.truth(), options.glm);
      if (!v.separation_flag) {
        const auto [g10, g01] = validation_rate_guess(dataset);
        starts.push_back(start_from(v.coefficients, nbeta, g10, g01, options));
      }
    } catch (const NumericalError&) {
      // too few or degenerate validation rows: rely on the naive start
    }
  }

  std::optional<MleFit> best;
  for (const auto& s : starts) {
    MleFit f;
    try {
      f = maximize(lik, s, options);
    } catch (const std::domain_error&) {
      continue;
    }
    if (!best || better(f, *best)) best = f;
  }
  if (!best) throw NumericalError("corrected likelihood is not finite at any starting point");
  best->starts_tried = static_cast<int>(starts.size());
  return *best;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

IdentifiabilityReport check_identifiability(const StudyDataset& dataset,
                                            const StageModel& fitted, Stage stage,
                                            double gamma10, double gamma01) {
  IdentifiabilityReport r;
  const Eigen::MatrixXd x = build_design_rows(dataset, fitted, stage).full();
  r.design_columns = x.cols();
  r.design_rank = design_rank(x);
  r.rank_deficient = r.design_rank < r.design_columns;
  if (x.rows() > 0 && x.cols() > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    r.condition_number = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  }

  r.gamma_margin = 1.0 - gamma10 - gamma01;
  r.monotonicity_violated = !MisclassRates::admissible(gamma10, gamma01);

  const Eigen::VectorXd eta = x * fitted.coefficients();
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double p = expit(eta(i));
    if (p < 1e-6 || p > 1.0 - 1e-6) ++r.boundary_count;
  }
  r.boundary_warning = r.boundary_count > 0;
  return r;
}

}  // namespace dtrmis
