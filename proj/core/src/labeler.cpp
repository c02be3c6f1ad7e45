#include "bondrisk/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <string>

#include "bondrisk/pipeline.hpp"

namespace bondrisk {

void SpreadParams::validate() const {
  if (!(loss_rate > 0.0)) throw std::invalid_argument("spread: loss_rate must be positive");
  if (!(floor > 0.0 && floor < cap && cap <= 1.0)) throw std::invalid_argument("spread: need 0 < floor < cap <= 1");
  if (ma_window < 1) throw std::invalid_argument("spread: ma_window must be >= 1");
}

void BackwardParams::validate() const {
  if (acceleration_days <= 0) throw std::invalid_argument("backward: acceleration horizon must be positive");
}

void CombineWeights::validate() const {
  if (gmm < 0 || cs < 0 || backward < 0) throw std::invalid_argument("combine: weights must be non-negative");
  if (std::abs(gmm + cs + backward - 1.0) > 1e-12) throw std::invalid_argument("combine: weights must sum to 1");
  if (!(prior_init >= 0.0 && prior_init <= 1.0)) throw std::invalid_argument("combine: prior_init must be in [0, 1]");
}

double spread_probability_raw(double yield, double riskfree, double loss_rate) {
  const double denom = yield + loss_rate;
  if (!(denom > 0.0)) throw std::domain_error("spread: yield <= -loss_rate leaves a non-positive denominator");
  return (yield - riskfree) / denom;
}

std::vector<double> spread_probability(std::span<const double> yields, std::span<const double> riskfree,
                                       const SpreadParams& params) {
  params.validate();
  if (yields.size() != riskfree.size()) throw std::invalid_argument("spread: series lengths differ");
  const std::size_t n = yields.size();
  const auto w = static_cast<std::size_t>(params.ma_window);
  std::vector<double> out(n);
  double window_sum = 0;
  for (std::size_t t = 0; t < n; ++t) {
    window_sum += yields[t] - riskfree[t];
    if (t >= w) window_sum -= yields[t - w] - riskfree[t - w];
    const double smoothed = window_sum / static_cast<double>(std::min(t + 1, w));
    const double denom = yields[t] + params.loss_rate;
    if (!(denom > 0.0)) throw std::domain_error("spread: yield <= -loss_rate at day " + std::to_string(t));
    const double p = smoothed / denom;
    out[t] = p >= params.cap ? params.cap : (p < params.floor ? params.floor : p);
  }
  return out;
}

double backward_defaulted(int default_date, int day, const BackwardParams& params) {
  params.validate();
  if (day > default_date) throw std::domain_error("backward: day is after the default date");
  const double N = params.acceleration_days;
  return N / (N + static_cast<double>(default_date - day));
}

double backward_matured(RatingGrade issue_grade, RatingGrade final_grade, int elapsed, int total) {
  if (total <= 0) throw std::domain_error("backward: total life must be positive");
  if (elapsed < 0 || elapsed > total) throw std::domain_error("backward: elapsed outside [0, total]");
  const double p0 = grade_to_probability(issue_grade);
  const double pT = grade_to_probability(final_grade);
  return static_cast<double>(elapsed) * (pT - p0) / static_cast<double>(total) + p0;
}

double combine(double p_gmm, double p_cs, double p_bwd, const CombineWeights& w) {
  return w.gmm * p_gmm + w.cs * p_cs + w.backward * p_bwd;
}

double gmm_probability(const GmmModel& model, std::span<const double> model_row) {
  const int k = model.assign(model_row);
  return grade_to_probability(RatingGrade(model.grade_of[static_cast<std::size_t>(k)]));
}

std::vector<double> clustering_row(const BondRecord& bond, std::size_t day_index) {
  static const std::vector<int> ids = default_registry().clustering_ids();
  std::vector<double> row(ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) row[j] = bond.features(day_index, feature::column(ids[j]));
  return row;
}

GmmModel fit_clustering(const std::vector<BondRecord>& filled_bonds, const VbGmmOptions& options) {
  const auto ids = default_registry().clustering_ids();
  const std::size_t d = ids.size();
  std::size_t n = 0;
  for (const auto& b : filled_bonds) n += b.features.rows();
  FeatureMatrix X(n, d, 0.0);
  std::size_t r = 0;
  for (const auto& b : filled_bonds)
    for (std::size_t t = 0; t < b.features.rows(); ++t, ++r) {
      auto row = clustering_row(b, t);
      for (std::size_t j = 0; j < d; ++j) {
        if (is_absent(row[j])) throw std::invalid_argument("fit_clustering: bond " + b.bond_id + " is not filled");
        X(r, j) = row[j];
      }
    }

  std::vector<double> mean(d, 0.0);
  std::vector<double> scale(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += X(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) scale[j] += (X(i, j) - mean[j]) * (X(i, j) - mean[j]);
  for (auto& s : scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s == 0.0) s = 1.0;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) X(i, j) = (X(i, j) - mean[j]) / scale[j];

  VbGmmOptions opt = options;
  opt.risk_column = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), feature::kRiskSpread) - ids.begin());
  GmmModel model = fit_vb_gmm(X, opt);
  model.input_mean = std::move(mean);
  model.input_scale = std::move(scale);
  return model;
}

LabelSeries annotate(const BondRecord& bond, const GmmModel& gmm, const SpreadParams& spread,
                     const BackwardParams& backward, const CombineWeights& weights) {
  weights.validate();
  const std::size_t T = bond.features.rows();
  LabelSeries s;
  s.bond_id = bond.bond_id;
  s.issue_date = bond.issue_date;
  s.p_gmm.resize(T);
  s.p_bwd.resize(T);
  s.p_integrated.resize(T);

  for (std::size_t t = 0; t < T; ++t) {
    auto raw = clustering_row(bond, t);
    for (double v : raw)
      if (is_absent(v)) throw std::invalid_argument("annotate: bond " + bond.bond_id + " is not filled");
    s.p_gmm[t] = gmm_probability(gmm, gmm.to_model_space(raw));
  }

  const auto yields = bond.features.column(feature::column(feature::kYieldToMaturity));
  const auto riskfree = bond.features.column(feature::column(feature::kTreasuryRate));
  s.p_cs = spread_probability(yields, riskfree, spread);

  const int total = bond.end_date - bond.issue_date;
  for (std::size_t t = 0; t < T; ++t) {
    const int day = bond.issue_date + static_cast<int>(t);
    if (bond.outcome == Outcome::Defaulted)
      s.p_bwd[t] = backward_defaulted(*bond.default_date, day, backward);
    else
      s.p_bwd[t] = total > 0 ? backward_matured(bond.issue_grade, bond.final_grade, static_cast<int>(t), total)
                             : grade_to_probability(bond.final_grade);
    s.p_integrated[t] = combine(s.p_gmm[t], s.p_cs[t], s.p_bwd[t], weights);
  }
  return s;
}

BondRecord with_prior_column(const BondRecord& bond, const LabelSeries& labels, double prior_init) {
  if (labels.bond_id != bond.bond_id || labels.size() != bond.features.rows())
    throw std::invalid_argument("prior column: labels do not match bond " + bond.bond_id);
  BondRecord out = bond;
  const auto c = feature::column(feature::kPriorDefaultProbability);
  for (std::size_t t = 0; t < labels.size(); ++t) out.features(t, c) = t == 0 ? prior_init : labels.p_integrated[t - 1];
  return out;
}

LabelResult label_bonds(const std::vector<BondRecord>& bonds, const LabelOptions& options) {
  options.spread.validate();
  options.backward.validate();
  options.weights.validate();
  std::vector<BondRecord> filled;
  filled.reserve(bonds.size());
  for (const auto& b : bonds) filled.push_back(fill_missing(b));

  LabelResult result;
  result.gmm = fit_clustering(filled, options.gmm);
  result.labels.resize(filled.size());

  const std::size_t jobs = std::max(1, options.jobs);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < filled.size(); i += step)
      result.labels[i] = annotate(filled[i], result.gmm, options.spread, options.backward, options.weights);
  };
  std::vector<std::future<void>> tasks;
  for (std::size_t j = 1; j < jobs; ++j) tasks.push_back(std::async(std::launch::async, work, j, jobs));
  work(0, jobs);
  for (auto& t : tasks) t.get();
  return result;
}

}  // namespace bondrisk
