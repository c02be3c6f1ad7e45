#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bondrisk {

/// Number of columns in every bond's daily feature matrix.
inline constexpr std::size_t kNumFeatures = 53;
/// Number of rating grades; 1 is the riskiest (D), 22 the safest (AAA+).
inline constexpr int kNumGrades = 22;

/// 1-based feature ids of the columns the rest of the system addresses directly.
namespace feature {
inline constexpr int kTreasuryRate = 8;
inline constexpr int kIndustry = 10;
inline constexpr int kIndustryDefaultRate = 11;
inline constexpr int kRegionDefaultRate = 12;
inline constexpr int kResidualMaturity = 49;
inline constexpr int kYieldToMaturity = 50;
inline constexpr int kRiskSpread = 51;
inline constexpr int kPriorDefaultProbability = 52;
inline constexpr int kForecastProfitChange = 53;

/// Zero-based matrix column of a 1-based feature id.
constexpr std::size_t column(int id) { return static_cast<std::size_t>(id - 1); }
}  // namespace feature

/// Marker for a cell that has not been observed. Resolved only by fill_missing.
inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();
inline bool is_absent(double v) { return std::isnan(v); }

enum class Dimension {
  Macroeconomy,
  IndustryRegion,
  BasicFinancials,
  RepaymentAbility,
  Profitability,
  IssuerCharacteristics,
  MarketConditions,
};

enum class Frequency { Daily, Monthly, Quarterly };
enum class FillRule { ForwardFill, LinearInterpolate };

std::string_view to_string(Dimension d);
std::string_view to_string(Frequency f);
std::string_view to_string(FillRule r);
Dimension dimension_from_string(std::string_view s);
Frequency frequency_from_string(std::string_view s);
FillRule fill_rule_from_string(std::string_view s);

struct FeatureSpec {
  int id = 0;
  std::string name;
  Dimension dimension = Dimension::Macroeconomy;
  Frequency native_frequency = Frequency::Daily;
  FillRule fill_rule = FillRule::LinearInterpolate;
  /// Derived columns are computed by the labeler, never synthesized.
  bool derived = false;

  bool operator==(const FeatureSpec&) const = default;
};

class FeatureRegistry {
 public:
  explicit FeatureRegistry(std::vector<FeatureSpec> entries);

  const std::vector<FeatureSpec>& entries() const { return entries_; }
  const FeatureSpec& by_id(int id) const;
  std::size_t size() const { return entries_.size(); }

  /// Feature ids that feed the clustering estimator (every non-derived column).
  std::vector<int> clustering_ids() const;

  std::string to_json() const;
  static FeatureRegistry from_json(std::string_view text);
  /// SHA-256 of the canonical JSON form, hex encoded.
  std::string hash() const;

  bool operator==(const FeatureRegistry&) const = default;

 private:
  std::vector<FeatureSpec> entries_;
};

/// The canonical 53-entry risk index system, in table order.
const FeatureRegistry& default_registry();
FeatureRegistry build_default_registry();

class RatingGrade {
 public:
  explicit RatingGrade(int grade);
  int value() const { return grade_; }
  auto operator<=>(const RatingGrade&) const = default;

 private:
  int grade_;
};

/// Letter on the 22-level scale; grade 22 is "AAA+", grade 1 is "D".
std::string_view rating_letter(RatingGrade grade);
RatingGrade grade_from_letter(std::string_view letter);

/// Slope of the affine transfer g(k) = beta * (11.5 - k).
inline const double kGradeSlope = std::log(99.0) / 10.5;

/// Logistic map of a grade to a default probability. p(1) = 0.99, p(22) = 0.01.
double grade_to_probability(RatingGrade grade);
/// Continuous extension over [1, 22]; used for latent grade paths.
double grade_to_probability(double grade);

enum class Outcome { Matured, Defaulted, LowRatedActive };
std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

enum class RiskClass { Low, High };
std::string_view to_string(RiskClass c);
RiskClass risk_class_of(Outcome o);

/// Row-major (trading day x feature) matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, double fill = kAbsent)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  /// Bitwise equality, so absent cells compare equal to each other.
  bool identical(const FeatureMatrix& other) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct BondRecord {
  std::string bond_id;
  int issue_date = 0;
  int end_date = 0;
  Outcome outcome = Outcome::Matured;
  RatingGrade issue_grade{kNumGrades};
  RatingGrade final_grade{kNumGrades};
  std::optional<int> default_date;
  FeatureMatrix features;
  int industry_id = 0;
  int region_id = 0;
  /// Generator ground truth: continuous grade per trading day. Empty for real data.
  std::vector<double> latent_grade;

  int trading_days() const { return end_date - issue_date + 1; }
  RiskClass risk_class() const { return risk_class_of(outcome); }

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
  bool identical(const BondRecord& other) const;
};

struct LabelSeries {
  std::string bond_id;
  int issue_date = 0;
  std::vector<double> p_gmm;
  std::vector<double> p_cs;
  std::vector<double> p_bwd;
  std::vector<double> p_integrated;

  std::size_t size() const { return p_integrated.size(); }
};

}  // namespace bondrisk
