#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bondrisk/models.hpp"
#include "bondrisk/pipeline.hpp"

namespace bondrisk {

struct ErrorMetrics {
  double rmse = 0;
  double mae = 0;
  std::size_t n = 0;
};

ErrorMetrics rmse_mae(std::span<const double> pred, std::span<const double> truth);

/// Ordinary least squares of y on x. When x is constant the slope is 0, the
/// intercept is mean(y) and r2 is absent; r2 is also absent when y is constant.
struct Regression {
  double slope = 0;
  double intercept = 0;
  std::optional<double> r2;
  std::size_t n = 0;
};

Regression ols(std::span<const double> x, std::span<const double> y);

/// First index with series[t] >= threshold.
std::optional<std::size_t> first_crossing(std::span<const double> series, double threshold = 0.5);

/// Reference crossing day minus predicted crossing day (positive = prediction
/// earlier). Absent when the reference never crosses. A prediction that never
/// crosses counts as crossing one day past the end of the series.
std::optional<double> lead_time(std::span<const double> predicted, std::span<const double> reference,
                                double threshold = 0.5);

/// Aligned daily series for one bond.
struct BondTrack {
  std::string bond_id;
  bool defaulted = false;
  std::vector<int> days;
  std::vector<double> predicted;
  std::vector<double> reference;
};

struct LeadRecord {
  std::string bond_id;
  double lead = 0;
};

struct RatingComparison {
  Regression regression;
  std::vector<LeadRecord> leads;
  std::optional<double> median_lead;
};

RatingComparison rating_comparison(const std::vector<BondTrack>& tracks, double threshold = 0.5);

std::optional<double> median(std::vector<double> v);

/// Groups per-sample predictions into per-bond tracks for the forecast day
/// (end_day + 1), with the reference taken from the bond's latent grade path.
std::vector<BondTrack> build_tracks(const WindowedDataset& ds, std::span<const std::size_t> indices,
                                    std::span<const double> predictions, const std::vector<BondRecord>& bonds);

/// Test-split evaluation of one trained model.
struct EvalResult {
  Variant variant = Variant::Ours;
  int window = 0;
  std::uint64_t seed = 0;
  std::string dataset_hash;
  ErrorMetrics model;
  ErrorMetrics persistence;
  std::optional<RatingComparison> rating;
};

/// Real (non-synthetic) test samples only. `bonds` enables the rating comparison;
/// `rolling` back-fills the prior column with the model's own predictions.
EvalResult evaluate_model(Model& model, const WindowedDataset& ds, const std::vector<BondRecord>* bonds,
                          bool rolling, std::vector<double>* predictions = nullptr);

std::vector<std::size_t> real_test_indices(const WindowedDataset& ds);

struct GridCell {
  Variant variant = Variant::Ours;
  int window = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> rmse;
  std::vector<double> mae;
  std::vector<double> persistence_rmse;
  double rmse_mean = 0;
  double rmse_std = 0;
  double mae_mean = 0;
  double mae_std = 0;
  bool rmse_top2 = false;
  bool mae_top2 = false;
  std::string dataset_hash;
};

struct GridReport {
  std::vector<GridCell> cells;
  const GridCell* find(Variant v, int window) const;
};

/// Fills means and sample standard deviations over seeds and marks the two
/// lowest means per window (ties broken by variant order).
void summarize(GridReport& report);

struct GridRequest {
  std::vector<Variant> variants = all_variants();
  std::vector<std::uint64_t> seeds = {0};
  ArchitectureConfig base{};
  int jobs = 1;
};

/// Groups results by (variant, window) and summarizes them.
GridReport grid_from_results(const std::vector<EvalResult>& results);

/// Trains and evaluates every (variant, window, seed). `datasets` maps window
/// to its preprocessed dataset; `dataset_hashes` labels the cells.
GridReport comparison_grid(const std::map<int, const WindowedDataset*>& datasets,
                           const std::map<int, std::string>& dataset_hashes, const GridRequest& request,
                           const std::function<void(const std::string&)>& log = {});

void write_grid_csv(const std::filesystem::path& path, const GridReport& report);
void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalResult>& results);
std::vector<EvalResult> read_eval_csv(const std::filesystem::path& path);
/// day, predicted_p, reference_p per bond for external plotting.
void write_tracks_csv(const std::filesystem::path& path, const std::vector<BondTrack>& tracks);

}  // namespace bondrisk
