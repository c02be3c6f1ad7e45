#include "bondrisk/schema.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "bondrisk/hashing.hpp"

namespace bondrisk {
namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<E, std::string_view>, N>& table,
             const char* what) {
  for (const auto& [e, name] : table)
    if (name == s) return e;
  throw std::invalid_argument(std::string("unknown ") + what + ": " + std::string(s));
}

template <typename E, std::size_t N>
std::string_view enum_name(E e, const std::array<std::pair<E, std::string_view>, N>& table) {
  for (const auto& [v, name] : table)
    if (v == e) return name;
  return "?";
}

constexpr std::array<std::pair<Dimension, std::string_view>, 7> kDimensions{{
    {Dimension::Macroeconomy, "Macroeconomy"},
    {Dimension::IndustryRegion, "IndustryRegion"},
    {Dimension::BasicFinancials, "BasicFinancials"},
    {Dimension::RepaymentAbility, "RepaymentAbility"},
    {Dimension::Profitability, "Profitability"},
    {Dimension::IssuerCharacteristics, "IssuerCharacteristics"},
    {Dimension::MarketConditions, "MarketConditions"},
}};

constexpr std::array<std::pair<Frequency, std::string_view>, 3> kFrequencies{{
    {Frequency::Daily, "daily"},
    {Frequency::Monthly, "monthly"},
    {Frequency::Quarterly, "quarterly"},
}};

constexpr std::array<std::pair<FillRule, std::string_view>, 2> kFillRules{{
    {FillRule::ForwardFill, "forward-fill"},
    {FillRule::LinearInterpolate, "linear-interpolate"},
}};

constexpr std::array<std::pair<Outcome, std::string_view>, 3> kOutcomes{{
    {Outcome::Matured, "Matured"},
    {Outcome::Defaulted, "Defaulted"},
    {Outcome::LowRatedActive, "LowRatedActive"},
}};

constexpr std::array<std::string_view, kNumGrades> kLetters{
    "D",  "C",    "CC", "CCC", "B-",  "B",  "B+", "BB-", "BB", "BB+", "BBB-",
    "BBB", "BBB+", "A-", "A",   "A+", "AA-", "AA", "AA+", "AAA-", "AAA", "AAA+"};

struct Row {
  const char* name;
  Dimension dim;
  Frequency freq;
};

// Table order. Low-frequency indicators are step functions at daily resolution.
constexpr Row kTable[kNumFeatures] = {
    {"Leading economic index", Dimension::Macroeconomy, Frequency::Monthly},
    {"Manufacturing PMI", Dimension::Macroeconomy, Frequency::Monthly},
    {"PPI month-on-month", Dimension::Macroeconomy, Frequency::Monthly},
    {"CPI month-on-month", Dimension::Macroeconomy, Frequency::Monthly},
    {"GDP quarter-on-quarter", Dimension::Macroeconomy, Frequency::Quarterly},
    {"RMB to USD exchange rate", Dimension::Macroeconomy, Frequency::Daily},
    {"3-month Shibor rate", Dimension::Macroeconomy, Frequency::Daily},
    {"Treasury rate for the same period", Dimension::Macroeconomy, Frequency::Daily},
    {"Stock of social financing scale", Dimension::Macroeconomy, Frequency::Monthly},
    {"Subordinate ShenWan primary industry", Dimension::IndustryRegion, Frequency::Daily},
    {"Bond default probability by category", Dimension::IndustryRegion, Frequency::Daily},
    {"Default probability by region", Dimension::IndustryRegion, Frequency::Daily},
    {"Operating revenue", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Operating cost", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Total profit", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Current assets", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Non-current assets", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Total assets", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Current liabilities", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Non-current liabilities", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Total liabilities", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Total stockholders' equity", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Cash flow from operations", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Cash flow from investment activities", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Cash flow from financing activities", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Total cash flow", Dimension::BasicFinancials, Frequency::Quarterly},
    {"Current ratio", Dimension::RepaymentAbility, Frequency::Quarterly},
    {"Quick ratio", Dimension::RepaymentAbility, Frequency::Quarterly},
    {"Superquick ratio", Dimension::RepaymentAbility, Frequency::Quarterly},
    {"Assets-liabilities ratio", Dimension::RepaymentAbility, Frequency::Quarterly},
    {"Equity ratio", Dimension::RepaymentAbility, Frequency::Quarterly},
    {"Bond to tangible assets ratio", Dimension::RepaymentAbility, Frequency::Quarterly},
    {"Gross sales margin", Dimension::RepaymentAbility, Frequency::Quarterly},
    {"Net profit margin on sales", Dimension::RepaymentAbility, Frequency::Quarterly},
    {"Return on assets", Dimension::RepaymentAbility, Frequency::Quarterly},
    {"Operating profit margin", Dimension::Profitability, Frequency::Quarterly},
    {"Return on equity", Dimension::Profitability, Frequency::Quarterly},
    {"Operating cycle", Dimension::Profitability, Frequency::Quarterly},
    {"Inventory turnover ratio", Dimension::Profitability, Frequency::Quarterly},
    {"Receivables turnover ratio", Dimension::Profitability, Frequency::Quarterly},
    {"Current asset turnover ratio", Dimension::Profitability, Frequency::Quarterly},
    {"Equity turnover", Dimension::Profitability, Frequency::Quarterly},
    {"Total asset turnover", Dimension::Profitability, Frequency::Quarterly},
    {"Credit residual ratio", Dimension::IssuerCharacteristics, Frequency::Monthly},
    {"Change in credit mom", Dimension::IssuerCharacteristics, Frequency::Monthly},
    {"Guaranteed credit ratio", Dimension::IssuerCharacteristics, Frequency::Quarterly},
    {"Stock price fluctuations", Dimension::IssuerCharacteristics, Frequency::Daily},
    {"Trading volume", Dimension::MarketConditions, Frequency::Daily},
    {"Residual maturity", Dimension::MarketConditions, Frequency::Daily},
    {"Yield to maturity", Dimension::MarketConditions, Frequency::Daily},
    {"Risk spread", Dimension::MarketConditions, Frequency::Daily},
    {"Prior default probability", Dimension::MarketConditions, Frequency::Daily},
    {"Forecast profit change", Dimension::Profitability, Frequency::Quarterly},
};

nlohmann::json spec_to_json(const FeatureSpec& f) {
  return {{"id", f.id},
          {"name", f.name},
          {"dimension", to_string(f.dimension)},
          {"native_frequency", to_string(f.native_frequency)},
          {"fill_rule", to_string(f.fill_rule)},
          {"derived", f.derived}};
}

}  // namespace

std::string_view to_string(Dimension d) { return enum_name(d, kDimensions); }
std::string_view to_string(Frequency f) { return enum_name(f, kFrequencies); }
std::string_view to_string(FillRule r) { return enum_name(r, kFillRules); }
std::string_view to_string(Outcome o) { return enum_name(o, kOutcomes); }
std::string_view to_string(RiskClass c) { return c == RiskClass::High ? "high" : "low"; }

Dimension dimension_from_string(std::string_view s) { return parse_enum(s, kDimensions, "dimension"); }
Frequency frequency_from_string(std::string_view s) { return parse_enum(s, kFrequencies, "frequency"); }
FillRule fill_rule_from_string(std::string_view s) { return parse_enum(s, kFillRules, "fill rule"); }
Outcome outcome_from_string(std::string_view s) { return parse_enum(s, kOutcomes, "outcome"); }

RiskClass risk_class_of(Outcome o) { return o == Outcome::Matured ? RiskClass::Low : RiskClass::High; }

FeatureRegistry::FeatureRegistry(std::vector<FeatureSpec> entries) : entries_(std::move(entries)) {
  std::set<int> ids;
  std::set<std::string> names;
  for (const auto& e : entries_) {
    if (!ids.insert(e.id).second) throw std::invalid_argument("duplicate feature id " + std::to_string(e.id));
    if (!names.insert(e.name).second) throw std::invalid_argument("duplicate feature name " + e.name);
  }
}

const FeatureSpec& FeatureRegistry::by_id(int id) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [id](const auto& e) { return e.id == id; });
  if (it == entries_.end()) throw std::out_of_range("no feature with id " + std::to_string(id));
  return *it;
}

std::vector<int> FeatureRegistry::clustering_ids() const {
  std::vector<int> ids;
  for (const auto& e : entries_)
    if (!e.derived) ids.push_back(e.id);
  return ids;
}

std::string FeatureRegistry::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries_) arr.push_back(spec_to_json(e));
  return arr.dump();
}

FeatureRegistry FeatureRegistry::from_json(std::string_view text) {
  auto arr = nlohmann::json::parse(text);
  std::vector<FeatureSpec> entries;
  for (const auto& j : arr) {
    FeatureSpec f;
    f.id = j.at("id").get<int>();
    f.name = j.at("name").get<std::string>();
    f.dimension = dimension_from_string(j.at("dimension").get<std::string>());
    f.native_frequency = frequency_from_string(j.at("native_frequency").get<std::string>());
    f.fill_rule = fill_rule_from_string(j.at("fill_rule").get<std::string>());
    f.derived = j.at("derived").get<bool>();
    entries.push_back(std::move(f));
  }
  return FeatureRegistry(std::move(entries));
}

std::string FeatureRegistry::hash() const { return sha256_hex(to_json()); }

FeatureRegistry build_default_registry() {
  std::vector<FeatureSpec> entries;
  entries.reserve(kNumFeatures);
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const Row& r = kTable[i];
    FeatureSpec f;
    f.id = static_cast<int>(i) + 1;
    f.name = r.name;
    f.dimension = r.dim;
    f.native_frequency = r.freq;
    f.fill_rule = r.freq == Frequency::Daily ? FillRule::LinearInterpolate : FillRule::ForwardFill;
    f.derived = f.id == feature::kPriorDefaultProbability;
    entries.push_back(std::move(f));
  }
  return FeatureRegistry(std::move(entries));
}

const FeatureRegistry& default_registry() {
  static const FeatureRegistry registry = build_default_registry();
  return registry;
}

RatingGrade::RatingGrade(int grade) : grade_(grade) {
  if (grade < 1 || grade > kNumGrades)
    throw std::domain_error("rating grade out of range [1, 22]: " + std::to_string(grade));
}

std::string_view rating_letter(RatingGrade grade) { return kLetters[grade.value() - 1]; }

RatingGrade grade_from_letter(std::string_view letter) {
  for (std::size_t i = 0; i < kLetters.size(); ++i)
    if (kLetters[i] == letter) return RatingGrade(static_cast<int>(i) + 1);
  throw std::invalid_argument("unknown rating letter: " + std::string(letter));
}

double grade_to_probability(RatingGrade grade) { return grade_to_probability(static_cast<double>(grade.value())); }

double grade_to_probability(double grade) {
  if (!(grade >= 1.0 && grade <= kNumGrades))
    throw std::domain_error("grade outside [1, 22]: " + std::to_string(grade));
  return 1.0 / (1.0 + std::exp(-kGradeSlope * (11.5 - grade)));
}

std::vector<double> FeatureMatrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void FeatureMatrix::set_column(std::size_t c, std::span<const double> values) {
  if (values.size() != rows_) throw std::invalid_argument("set_column: length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

bool FeatureMatrix::identical(const FeatureMatrix& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

void BondRecord::validate() const {
  auto fail = [this](const std::string& what) {
    throw std::invalid_argument("bond " + bond_id + ": " + what);
  };
  if (end_date < issue_date) fail("end_date precedes issue_date");
  const bool defaulted = outcome == Outcome::Defaulted;
  if (defaulted != default_date.has_value()) fail("default_date must be present exactly for defaulted bonds");
  if (default_date && !(issue_date < *default_date && *default_date <= end_date))
    fail("default_date outside (issue_date, end_date]");
  if (features.rows() != static_cast<std::size_t>(trading_days()) || features.cols() != kNumFeatures)
    fail("feature matrix shape does not match trading days x 53");
  if (!latent_grade.empty() && latent_grade.size() != features.rows()) fail("latent grade path length mismatch");
}

bool BondRecord::identical(const BondRecord& o) const {
  return bond_id == o.bond_id && issue_date == o.issue_date && end_date == o.end_date && outcome == o.outcome &&
         issue_grade == o.issue_grade && final_grade == o.final_grade && default_date == o.default_date &&
         industry_id == o.industry_id && region_id == o.region_id && features.identical(o.features) &&
         latent_grade.size() == o.latent_grade.size() &&
         (latent_grade.empty() ||
          std::memcmp(latent_grade.data(), o.latent_grade.data(), latent_grade.size() * sizeof(double)) == 0);
}

}  // namespace bondrisk
