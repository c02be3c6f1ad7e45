#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bondrisk/schema.hpp"
#include "bondrisk/vbgmm.hpp"

namespace bondrisk {

struct SpreadParams {
  double loss_rate = 0.70;
  double floor = 0.05;
  double cap = 1.0;
  int ma_window = 5;

  void validate() const;
};

struct BackwardParams {
  int acceleration_days = 120;

  void validate() const;
};

struct CombineWeights {
  double gmm = 0.3;
  double cs = 0.3;
  double backward = 0.4;
  double prior_init = 0.5;

  void validate() const;
};

/// Default probability implied by one (yield, risk-free) pair before smoothing
/// and clamping: (r_b - r_f) / (r_b + loss_rate).
double spread_probability_raw(double yield, double riskfree, double loss_rate);

/// Trailing moving average of the credit spread, divided by (r_b + loss_rate),
/// then clamped to [floor, cap]. Throws std::domain_error when r_b <= -loss_rate.
std::vector<double> spread_probability(std::span<const double> yields, std::span<const double> riskfree,
                                       const SpreadParams& params);

/// N / (N + days until default). Throws std::domain_error after the default date.
double backward_defaulted(int default_date, int day, const BackwardParams& params);

/// Linear path from the issue-grade probability to the final-grade probability
/// over `total` elapsed days.
double backward_matured(RatingGrade issue_grade, RatingGrade final_grade, int elapsed, int total);

double combine(double p_gmm, double p_cs, double p_bwd, const CombineWeights& w);

/// Probability of the grade of the row's argmax-responsibility component.
double gmm_probability(const GmmModel& model, std::span<const double> model_row);

/// Pooled z-scoring of the clustering columns of every bond-day, then a VB-GMM fit.
/// Bonds must be filled. The returned model maps raw clustering rows itself.
GmmModel fit_clustering(const std::vector<BondRecord>& filled_bonds, const VbGmmOptions& options);

/// Clustering columns (raw, unscaled) of one trading day.
std::vector<double> clustering_row(const BondRecord& bond, std::size_t day_index);

/// Daily labels of one filled bond.
LabelSeries annotate(const BondRecord& bond, const GmmModel& gmm, const SpreadParams& spread,
                     const BackwardParams& backward, const CombineWeights& weights);

/// Copy of `bond` whose prior-probability column holds the previous day's
/// integrated label (prior_init on the first day).
BondRecord with_prior_column(const BondRecord& bond, const LabelSeries& labels, double prior_init);

struct LabelOptions {
  VbGmmOptions gmm{};
  SpreadParams spread{};
  BackwardParams backward{};
  CombineWeights weights{};
  int jobs = 1;
};

struct LabelResult {
  GmmModel gmm;
  std::vector<LabelSeries> labels;
};

/// Fill every bond, fit the clustering model, and annotate each bond.
LabelResult label_bonds(const std::vector<BondRecord>& bonds, const LabelOptions& options);

}  // namespace bondrisk
