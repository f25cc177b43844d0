#include "dtrmis/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dtrmis {

// ---------------------------------------------------------------------------
// Rates
// ---------------------------------------------------------------------------

bool MisclassRates::admissible(double gamma10, double gamma01) {
  if (!std::isfinite(gamma10) || !std::isfinite(gamma01)) return false;
  if (gamma10 < 0.0 || gamma10 >= 1.0) return false;
  if (gamma01 < 0.0 || gamma01 >= 1.0) return false;
  return 1.0 - gamma10 - gamma01 > kMarginTolerance;
}

MisclassRates::MisclassRates(double gamma10, double gamma01)
    : gamma10_(gamma10), gamma01_(gamma01) {
  if (!admissible(gamma10, gamma01)) {
    std::ostringstream os;
    os << "misclassification rates (" << gamma10 << ", " << gamma01
       << ") violate 0 <= gamma < 1 and gamma10 + gamma01 < 1";
    throw std::invalid_argument(os.str());
  }
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

namespace {

std::optional<std::size_t> find_name(const std::vector<std::string>& names,
                                     std::string_view name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

bool binary(int v) { return v == 0 || v == 1; }
bool treatment(int v) { return v == -1 || v == 1; }

void check_trajectory(const Trajectory& t, const Schema& schema, std::size_t i,
                      bool validation) {
  auto fail = [i](const std::string& what) {
    throw DataError("trajectory " + std::to_string(i) + ": " + what);
  };
  if (!treatment(t.treatment1)) fail("treatment1 must be -1 or +1");
  if (schema.two_stage) {
    if (!t.treatment2) fail("two-stage dataset requires treatment2");
    if (!treatment(*t.treatment2)) fail("treatment2 must be -1 or +1");
  } else {
    if (t.treatment2) fail("one-stage trajectory carries treatment2");
    if (!t.stage2_covariates.empty()) fail("one-stage trajectory carries stage-2 covariates");
  }
  if (!t.true_outcome && !t.surrogate_outcome) fail("no outcome present");
  if (t.true_outcome && !binary(*t.true_outcome)) fail("true outcome must be 0 or 1");
  if (t.surrogate_outcome && !binary(*t.surrogate_outcome))
    fail("surrogate outcome must be 0 or 1");
  if (validation && (!t.true_outcome || !t.surrogate_outcome))
    fail("validation trajectory requires both outcomes");
  if (!validation && !t.surrogate_outcome)
    fail("main-study trajectory requires the surrogate outcome");
}

}  // namespace

std::optional<std::size_t> Schema::stage1_index(std::string_view name) const {
  return find_name(stage1_names, name);
}

std::optional<std::size_t> Schema::stage2_index(std::string_view name) const {
  return find_name(stage2_names, name);
}

StudyDataset::StudyDataset(Schema schema, std::vector<Trajectory> trajectories,
                           std::size_t validation_count)
    : schema_(std::move(schema)),
      trajectories_(std::move(trajectories)),
      validation_count_(validation_count) {
  if (validation_count_ > trajectories_.size())
    throw DataError("validation count exceeds dataset size");
  for (std::size_t i = 0; i < trajectories_.size(); ++i)
    check_trajectory(trajectories_[i], schema_, i, i < validation_count_);
}

// ---------------------------------------------------------------------------
// Columns
// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

ColumnSpec parse_column(std::string_view text, const Schema& schema) {
  ColumnSpec column;
  column.label = trim(text);
  if (column.label.empty()) throw ConfigError("empty column specifier");
  if (column.label == "1") return column;

  std::size_t start = 0;
  while (start <= column.label.size()) {
    auto stop = column.label.find('*', start);
    if (stop == std::string::npos) stop = column.label.size();
    const std::string name = trim(std::string_view(column.label).substr(start, stop - start));
    if (name.empty()) throw ConfigError("malformed column specifier '" + column.label + "'");
    if (name == "1") {
      // multiplying by one is a no-op
    } else if (name == schema.treatment1_name) {
      column.factors.push_back({Source::treatment1, 0});
    } else if (auto i = schema.stage1_index(name)) {
      column.factors.push_back({Source::stage1_covariate, *i});
    } else if (auto j = schema.stage2_index(name)) {
      column.factors.push_back({Source::stage2_covariate, *j});
    } else {
      throw ConfigError("unknown column '" + name + "' in specifier '" + column.label + "'");
    }
    start = stop + 1;
  }
  return column;
}

std::vector<ColumnSpec> parse_columns(const std::vector<std::string>& texts,
                                      const Schema& schema) {
  std::vector<ColumnSpec> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(parse_column(t, schema));
  return out;
}

double column_value(const Trajectory& t, const ColumnSpec& column, std::size_t row_index) {
  double v = 1.0;
  for (const auto& f : column.factors) {
    switch (f.source) {
      case Source::treatment1:
        v *= t.treatment1;
        break;
      case Source::stage1_covariate:
        if (f.index >= t.stage1_covariates.size())
          throw DataError("trajectory " + std::to_string(row_index) +
                          " lacks the covariate for column '" + column.label + "'");
        v *= t.stage1_covariates[f.index];
        break;
      case Source::stage2_covariate:
        if (f.index >= t.stage2_covariates.size())
          throw DataError("trajectory " + std::to_string(row_index) +
                          " lacks the covariate for column '" + column.label + "'");
        v *= t.stage2_covariates[f.index];
        break;
    }
  }
  return v;
}

Eigen::VectorXd history_row(const Trajectory& t, const std::vector<ColumnSpec>& columns,
                            std::size_t row_index) {
  Eigen::VectorXd h(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k)
    h(static_cast<Eigen::Index>(k)) = column_value(t, columns[k], row_index);
  return h;
}

// ---------------------------------------------------------------------------
// Stage model and design
// ---------------------------------------------------------------------------

StageModel::StageModel(std::vector<ColumnSpec> treatment_free, std::vector<ColumnSpec> blip)
    : treatment_free_columns(std::move(treatment_free)),
      blip_columns(std::move(blip)),
      beta(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(treatment_free_columns.size()))),
      psi(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(blip_columns.size()))) {}

StageModel::StageModel(std::vector<ColumnSpec> treatment_free, std::vector<ColumnSpec> blip,
                       Eigen::VectorXd beta_, Eigen::VectorXd psi_)
    : treatment_free_columns(std::move(treatment_free)),
      blip_columns(std::move(blip)),
      beta(std::move(beta_)),
      psi(std::move(psi_)) {
  if (static_cast<std::size_t>(beta.size()) != treatment_free_columns.size() ||
      static_cast<std::size_t>(psi.size()) != blip_columns.size())
    throw std::invalid_argument("stage model coefficient dimensions do not match its columns");
}

Eigen::VectorXd StageModel::coefficients() const {
  Eigen::VectorXd out(beta.size() + psi.size());
  out << beta, psi;
  return out;
}

StageModel StageModel::with_coefficients(const Eigen::VectorXd& stacked) const {
  if (static_cast<std::size_t>(stacked.size()) != parameter_count())
    throw std::invalid_argument("coefficient vector has the wrong length");
  StageModel m = *this;
  m.beta = stacked.head(beta.size());
  m.psi = stacked.tail(psi.size());
  return m;
}

Eigen::MatrixXd DesignRows::full() const {
  Eigen::MatrixXd x(treatment_free.rows(), treatment_free.cols() + blip.cols());
  x.leftCols(treatment_free.cols()) = treatment_free;
  x.rightCols(blip.cols()) = blip.array().colwise() * treatment.array();
  return x;
}

DesignRows DesignRows::top_rows(Eigen::Index count) const {
  return {treatment_free.topRows(count), blip.topRows(count), treatment.head(count)};
}

DesignRows build_design_rows(const StudyDataset& dataset, const StageModel& model,
                             Stage stage) {
  const auto n = static_cast<Eigen::Index>(dataset.size());
  const auto p0 = static_cast<Eigen::Index>(model.treatment_free_size());
  const auto p1 = static_cast<Eigen::Index>(model.blip_size());
  DesignRows rows{Eigen::MatrixXd(n, p0), Eigen::MatrixXd(n, p1), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const Trajectory& t = dataset[idx];
    for (Eigen::Index k = 0; k < p0; ++k)
      rows.treatment_free(i, k) =
          column_value(t, model.treatment_free_columns[static_cast<std::size_t>(k)], idx);
    for (Eigen::Index k = 0; k < p1; ++k)
      rows.blip(i, k) = column_value(t, model.blip_columns[static_cast<std::size_t>(k)], idx);
    if (stage == Stage::one) {
      rows.treatment(i) = t.treatment1;
    } else {
      if (!t.treatment2)
        throw DataError("trajectory " + std::to_string(idx) + " has no stage-2 treatment");
      rows.treatment(i) = *t.treatment2;
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Regime
// ---------------------------------------------------------------------------

int optimal_action(const Eigen::VectorXd& psi, const Eigen::VectorXd& h_blip) {
  if (psi.size() != h_blip.size())
    throw std::invalid_argument("blip coefficient and history dimensions differ");
  return psi.dot(h_blip) > 0.0 ? 1 : -1;
}

Regime::Regime(StageModel stage1, std::optional<StageModel> stage2)
    : stage1_(std::move(stage1)), stage2_(std::move(stage2)) {}

int Regime::decide(const Trajectory& t, Stage stage) const {
  if (stage == Stage::one) return optimal_action(stage1_.psi, history_row(t, stage1_.blip_columns));
  if (!stage2_) throw std::logic_error("regime has no stage-2 rule");
  return optimal_action(stage2_->psi, history_row(t, stage2_->blip_columns));
}

// ---------------------------------------------------------------------------
// Corruption and standardization
// ---------------------------------------------------------------------------

int corrupt_outcome(int y, const MisclassRates& rates, double draw) {
  if (y == 0) return draw < rates.gamma10() ? 1 : 0;
  return draw < rates.gamma01() ? 0 : 1;
}

StandardizedDataset standardize_columns(const StudyDataset& dataset,
                                        const std::vector<std::string>& columns) {
  const Schema& schema = dataset.schema();
  std::vector<Trajectory> rows = dataset.trajectories();
  std::vector<ColumnTransform> transforms;
  const double n = static_cast<double>(rows.size());
  if (!columns.empty() && rows.size() < 2)
    throw DataError("standardization needs at least two rows");

  for (const auto& name : columns) {
    std::vector<double> Trajectory::*slot = nullptr;
    std::size_t index = 0;
    if (auto i = schema.stage1_index(name)) {
      slot = &Trajectory::stage1_covariates;
      index = *i;
    } else if (auto j = schema.stage2_index(name)) {
      slot = &Trajectory::stage2_covariates;
      index = *j;
    } else {
      throw DataError("cannot standardize unknown column '" + name + "'");
    }

    double mean = 0.0;
    for (const auto& t : rows) mean += (t.*slot).at(index);
    mean /= n;
    double ss = 0.0;
    for (const auto& t : rows) {
      const double d = (t.*slot)[index] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
      throw DataError("column '" + name + "' has zero variance");

    ColumnTransform tr{name, mean, sd};
    for (auto& t : rows) (t.*slot)[index] = tr.apply((t.*slot)[index]);
    transforms.push_back(tr);
  }
  return {StudyDataset(schema, std::move(rows), dataset.validation_count()),
          std::move(transforms)};
}

double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace dtrmis
