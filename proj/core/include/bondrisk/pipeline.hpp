#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bondrisk/schema.hpp"

namespace bondrisk {

enum class Split { Train, Val, Test };
std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

/// Interior gaps are linearly interpolated per column, leading and trailing
/// gaps take the nearest observed value. Derived columns that are entirely
/// absent are left for the labeler. Throws std::invalid_argument naming any
/// other column with no observed value.
BondRecord fill_missing(const BondRecord& bond);

/// Linear interpolation with edge extension over one series.
std::vector<double> fill_series(std::span<const double> values);

struct Standardized {
  BondRecord bond;
  std::vector<double> mean;
  std::vector<double> scale;
};

/// Per-bond z-scores over the bond's full life with population sigma.
/// Constant columns become zeros with scale 1. Derived probability columns
/// are passed through unchanged (mean 0, scale 1).
Standardized standardize(const BondRecord& bond);

struct SampleMeta {
  std::string bond_id;
  int end_day = 0;
  RiskClass risk_class = RiskClass::Low;
  Split split = Split::Train;
  bool synthetic = false;

  bool operator==(const SampleMeta&) const = default;
};

/// Sliding windows of w consecutive days, each labeled with the integrated
/// probability of the following day.
struct WindowedDataset {
  int window = 0;
  std::size_t n_features = kNumFeatures;
  std::vector<float> inputs;       // n_samples x window x n_features
  std::vector<float> labels;       // next-day integrated probability
  std::vector<float> last_labels;  // integrated probability on the window's last day
  std::vector<SampleMeta> meta;
  std::map<std::string, Split> bond_split;
  std::uint64_t seed = 0;
  std::string registry_hash;
  int skipped_bonds = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(window) * n_features; }
  std::span<const float> sample(std::size_t i) const { return {inputs.data() + i * sample_size(), sample_size()}; }
  std::span<float> sample(std::size_t i) { return {inputs.data() + i * sample_size(), sample_size()}; }
  std::vector<std::size_t> indices(Split s) const;
  std::size_t count(Split s, bool synthetic) const;

  void push_back(std::span<const float> x, float label, float last_label, SampleMeta m);
  bool identical(const WindowedDataset& other) const;
};

/// Bonds must be standardized and aligned one-to-one with their labels.
/// Bonds with T <= w contribute no samples and are counted in skipped_bonds.
WindowedDataset make_windows(const std::vector<BondRecord>& bonds, const std::vector<LabelSeries>& labels, int w);

/// 80/10/10 by bond within each risk class; rounding residue goes to train.
/// Throws std::invalid_argument when a class has fewer than 3 bonds.
std::map<std::string, Split> split_bonds(const std::vector<BondRecord>& bonds, std::uint64_t seed);
void apply_split(WindowedDataset& ds, const std::map<std::string, Split>& assignment);

struct SmoteParams {
  double target_ratio = 1.0;
  int k_neighbors = 5;
  std::uint64_t seed = 0;
};

/// One synthetic row s + u * (nn - s) with its provenance.
struct SmoteDraw {
  std::size_t source = 0;
  std::size_t neighbor = 0;
  double u = 0.0;
};

/// Plans `count` synthetic draws over `rows` (row-major, dim columns): sources
/// cycle over the minority rows in a seeded order, neighbors are drawn
/// uniformly from the k Euclidean nearest minority rows.
std::vector<SmoteDraw> smote_plan(std::span<const float> rows, std::size_t dim, std::size_t count, int k,
                                  std::uint64_t seed);

/// Oversamples high-risk training windows until high:low >= target_ratio.
/// Validation and test samples are untouched.
WindowedDataset smote_balance(const WindowedDataset& ds, const SmoteParams& params);

struct PreprocessOptions {
  int window = 2;
  std::uint64_t seed = 0;
  SmoteParams smote{};
  double prior_init = 0.5;
};

/// fill -> prior column -> standardize -> windows -> split -> SMOTE on train.
WindowedDataset preprocess(const std::vector<BondRecord>& bonds, const std::vector<LabelSeries>& labels,
                           const PreprocessOptions& options);

// Binary container: "BRWD" magic, u32 version, u64 header length, JSON header,
// then little-endian float32 inputs, labels and last_labels.
void write_dataset(const std::filesystem::path& path, const WindowedDataset& ds);
WindowedDataset read_dataset(const std::filesystem::path& path);

}  // namespace bondrisk
