#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dtrmis {

// Error categories. The CLI maps these onto exit codes.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-differential misclassification rates of a binary outcome.
///
/// gamma10 = P(Y* = 1 | Y = 0), gamma01 = P(Y* = 0 | Y = 1). Construction
/// enforces 0 <= gamma < 1 and the monotonicity condition gamma10 + gamma01 < 1.
class MisclassRates {
 public:
  MisclassRates() = default;
  MisclassRates(double gamma10, double gamma01);

  double gamma10() const { return gamma10_; }
  double gamma01() const { return gamma01_; }

  /// 1 - gamma10 - gamma01; strictly positive for a valid instance.
  double margin() const { return 1.0 - gamma10_ - gamma01_; }

  /// True when (gamma10, gamma01) would be accepted by the constructor.
  static bool admissible(double gamma10, double gamma01);

  /// Margins at or below this count as gamma10 + gamma01 >= 1, so a value
  /// that round-trips through the logit scale cannot slip past the check.
  static constexpr double kMarginTolerance = 1e-9;

  friend bool operator==(const MisclassRates&, const MisclassRates&) = default;

 private:
  double gamma10_ = 0.0;
  double gamma01_ = 0.0;
};

/// One patient's observed data. Treatments are coded -1/+1, outcomes 0/1.
struct Trajectory {
  std::vector<double> stage1_covariates;
  int treatment1 = -1;
  std::vector<double> stage2_covariates;
  std::optional<int> treatment2;
  std::optional<int> true_outcome;
  std::optional<int> surrogate_outcome;

  bool two_stage() const { return treatment2.has_value(); }
};

/// Names of the per-trajectory covariate slots and treatments.
struct Schema {
  std::vector<std::string> stage1_names;
  std::vector<std::string> stage2_names;
  std::string treatment1_name = "A1";
  std::string treatment2_name = "A2";
  bool two_stage = false;

  std::optional<std::size_t> stage1_index(std::string_view name) const;
  std::optional<std::size_t> stage2_index(std::string_view name) const;
};

/// Trajectories ordered as validation subset V (first validation_count rows,
/// both outcomes present) followed by the main subset (surrogate only).
class StudyDataset {
 public:
  StudyDataset() = default;
  StudyDataset(Schema schema, std::vector<Trajectory> trajectories,
               std::size_t validation_count);

  const Schema& schema() const { return schema_; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const Trajectory& operator[](std::size_t i) const { return trajectories_[i]; }

  std::size_t size() const { return trajectories_.size(); }
  std::size_t validation_count() const { return validation_count_; }
  std::size_t main_count() const { return size() - validation_count_; }
  bool empty() const { return trajectories_.empty(); }
  bool two_stage() const { return schema_.two_stage; }

  std::span<const Trajectory> validation() const {
    return {trajectories_.data(), validation_count_};
  }
  std::span<const Trajectory> main() const {
    return {trajectories_.data() + validation_count_, main_count()};
  }

 private:
  Schema schema_;
  std::vector<Trajectory> trajectories_;
  std::size_t validation_count_ = 0;
};

/// One factor of a design column: a covariate slot or the stage-1 treatment.
enum class Source { stage1_covariate, stage2_covariate, treatment1 };

struct Factor {
  Source source = Source::stage1_covariate;
  std::size_t index = 0;

  friend bool operator==(const Factor&, const Factor&) = default;
};

/// A design column is a product of factors; the empty product is the intercept.
struct ColumnSpec {
  std::string label;
  std::vector<Factor> factors;

  bool is_intercept() const { return factors.empty(); }
  static ColumnSpec intercept() { return {"1", {}}; }
};

/// Parses "1", "X1", "A1", or products such as "Z1*A1" against a schema.
/// Throws ConfigError on an unknown name.
ColumnSpec parse_column(std::string_view text, const Schema& schema);
std::vector<ColumnSpec> parse_columns(const std::vector<std::string>& texts,
                                      const Schema& schema);

/// Value of one design column for one trajectory. Throws DataError when the
/// trajectory does not carry the covariate the column refers to.
double column_value(const Trajectory& t, const ColumnSpec& column,
                    std::size_t row_index = 0);

Eigen::VectorXd history_row(const Trajectory& t,
                            const std::vector<ColumnSpec>& columns,
                            std::size_t row_index = 0);

/// Q-function parameterization for one stage: treatment-free part beta'H0 and
/// blip part (psi'H1) * a.
struct StageModel {
  std::vector<ColumnSpec> treatment_free_columns;
  std::vector<ColumnSpec> blip_columns;
  Eigen::VectorXd beta;
  Eigen::VectorXd psi;

  StageModel() = default;
  /// Coefficients start at zero.
  StageModel(std::vector<ColumnSpec> treatment_free, std::vector<ColumnSpec> blip);
  StageModel(std::vector<ColumnSpec> treatment_free, std::vector<ColumnSpec> blip,
             Eigen::VectorXd beta, Eigen::VectorXd psi);

  std::size_t treatment_free_size() const { return treatment_free_columns.size(); }
  std::size_t blip_size() const { return blip_columns.size(); }
  std::size_t parameter_count() const { return treatment_free_size() + blip_size(); }

  /// (beta, psi) stacked.
  Eigen::VectorXd coefficients() const;
  StageModel with_coefficients(const Eigen::VectorXd& stacked) const;
};

/// Design rows for one stage. Row i corresponds to trajectory i.
struct DesignRows {
  Eigen::MatrixXd treatment_free;
  Eigen::MatrixXd blip;
  Eigen::VectorXd treatment;

  Eigen::Index rows() const { return treatment_free.rows(); }
  /// [H0, H1 * a]: the regression design whose coefficients are (beta, psi).
  Eigen::MatrixXd full() const;
  DesignRows top_rows(Eigen::Index count) const;
};

enum class Stage { one = 1, two = 2 };

DesignRows build_design_rows(const StudyDataset& dataset, const StageModel& model,
                             Stage stage);

/// Sign rule of the blip: +1 when psi'h > 0, -1 otherwise (including ties).
int optimal_action(const Eigen::VectorXd& psi, const Eigen::VectorXd& h_blip);

/// Per-stage decision rules derived from fitted blip coefficients.
class Regime {
 public:
  Regime(StageModel stage1, std::optional<StageModel> stage2 = std::nullopt);

  /// Recommended treatment at the given stage for trajectory t.
  int decide(const Trajectory& t, Stage stage) const;

  const StageModel& stage1() const { return stage1_; }
  const std::optional<StageModel>& stage2() const { return stage2_; }

 private:
  StageModel stage1_;
  std::optional<StageModel> stage2_;
};

/// Inverse-CDF corruption: a 0 flips to 1 when draw < gamma10, a 1 flips to 0
/// when draw < gamma01.
int corrupt_outcome(int y, const MisclassRates& rates, double draw);

struct ColumnTransform {
  std::string name;
  double mean = 0.0;
  double scale = 1.0;

  double apply(double v) const { return (v - mean) / scale; }
  double invert(double z) const { return z * scale + mean; }
};

struct StandardizedDataset {
  StudyDataset dataset;
  std::vector<ColumnTransform> transforms;
};

/// Centres and scales the named covariates to mean 0, sample sd 1 over the
/// pooled dataset. Throws DataError on an unknown or zero-variance column.
StandardizedDataset standardize_columns(const StudyDataset& dataset,
                                        const std::vector<std::string>& columns);

double expit(double x);
double logit(double p);

}  // namespace dtrmis
