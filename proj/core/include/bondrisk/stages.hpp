#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bondrisk/labeler.hpp"
#include "bondrisk/models.hpp"
#include "bondrisk/pipeline.hpp"
#include "bondrisk/synthgen.hpp"

namespace bondrisk {

inline constexpr const char* kVersionString = "0.1.0";

/// Invalid configuration; the message lists every violated bound.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A required upstream artifact does not exist.
class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every tunable of the stage chain as one flat record.
struct RunConfig {
  std::uint64_t seed = 7;
  int jobs = 1;

  // generate
  int n_bonds = 200;
  double default_fraction = 675.0 / 7361.0;
  int min_life = 60;
  int max_life = 250;
  int stress_onset_days = 120;
  double missing_fraction = 0.05;
  int n_industries = 8;
  int n_regions = 6;

  // label
  int gmm_components = kNumGrades;
  int gmm_max_iter = 200;
  double gmm_tol = 1e-6;
  double loss_rate = 0.70;
  double spread_floor = 0.05;
  int ma_window = 5;
  int acceleration_days = 120;
  double weight_gmm = 0.3;
  double weight_cs = 0.3;
  double weight_backward = 0.4;
  double prior_init = 0.5;

  // preprocess
  std::vector<int> windows = {2, 5, 7, 10};
  double smote_ratio = 1.0;
  int smote_k = 5;

  // train
  std::vector<std::string> variants = {"ours", "rnn", "lstm", "pconvlstm", "boosting"};
  /// Training seeds; empty means {seed}.
  std::vector<std::uint64_t> train_seeds;
  int epochs = 50;
  int batch_size = 2;
  int patience = 10;
  int hidden = 32;
  int depth = 10;
  int conv_channels = 8;
  int conv_kernel = 3;
  double learning_rate = 0.001;
  int boosting_rounds = 200;
  int boosting_depth = 3;
  double boosting_shrinkage = 0.1;

  // evaluate
  bool rolling = false;

  /// Throws ConfigError listing every violated bound.
  void validate() const;
  nlohmann::json to_json() const;
  /// Starts from defaults; unknown keys are a ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  /// Overlays the keys present in `j` onto this config.
  void merge(const nlohmann::json& j);

  MarketConfig market() const;
  LabelOptions label_options() const;
  PreprocessOptions preprocess_options(int window) const;
  ArchitectureConfig architecture(Variant v, int window, std::uint64_t seed) const;
  std::vector<std::uint64_t> seeds() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

using Logger = std::function<void(const std::string&)>;

/// Writes `<stage>` manifest: content hashes of inputs and outputs (keyed by
/// file name), the config, seed and version.
void write_manifest(const std::filesystem::path& path, const std::string& stage, const RunConfig& config,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs);

std::string checkpoint_name(Variant v, int window, std::uint64_t seed);
std::string dataset_name(int window);

void stage_generate(const RunConfig& config, const std::filesystem::path& out_dir, const Logger& log = {});
void stage_label(const RunConfig& config, const std::filesystem::path& market, const std::filesystem::path& out_dir,
                 const Logger& log = {});
void stage_preprocess(const RunConfig& config, const std::filesystem::path& market,
                      const std::filesystem::path& labels, const std::filesystem::path& out_dir,
                      const Logger& log = {});
void stage_train(const RunConfig& config, const std::filesystem::path& dataset, Variant variant, std::uint64_t seed,
                 const std::filesystem::path& checkpoint, const Logger& log = {});
void stage_predict(const RunConfig& config, const std::filesystem::path& checkpoint,
                   const std::filesystem::path& dataset, const std::filesystem::path& out_csv,
                   const Logger& log = {});
/// One row per checkpoint; `market` (optional) enables the rating comparison
/// and a per-checkpoint tracks CSV next to `out_csv`.
void stage_evaluate(const RunConfig& config, const std::vector<std::filesystem::path>& checkpoints,
                    const std::vector<std::filesystem::path>& datasets,
                    const std::optional<std::filesystem::path>& market, const std::filesystem::path& out_csv,
                    const Logger& log = {});
/// Aggregates every evaluation CSV in `grid_dir` into a variant x window table.
void stage_report(const RunConfig& config, const std::filesystem::path& grid_dir, const std::filesystem::path& out_csv,
                  const Logger& log = {});

/// generate -> label -> preprocess -> train -> predict -> evaluate -> report under `root`.
void run_pipeline(const RunConfig& config, const std::filesystem::path& root, const Logger& log = {});

}  // namespace bondrisk
