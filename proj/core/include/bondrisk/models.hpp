#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bondrisk/boosting.hpp"
#include "bondrisk/nn/layers.hpp"
#include "bondrisk/nn/optim.hpp"
#include "bondrisk/pipeline.hpp"

namespace bondrisk {

enum class Variant { Ours, Rnn, Lstm, PConvLstm, Boosting };
std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);
const std::vector<Variant>& all_variants();

/// Raised when training produces a non-finite loss.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArchitectureConfig {
  Variant variant = Variant::Ours;
  int window = 2;
  std::size_t n_features = kNumFeatures;
  std::size_t hidden = 32;
  std::size_t conv_channels = 8;
  std::size_t conv_kernel = 3;
  /// Recurrent layers after the ConvLSTM encoder (Ours, PConvLSTM) or in total (LSTM, RNN).
  std::size_t depth = 10;
  /// One rate per stacked layer after the encoder.
  std::vector<double> dropout = {0.5, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.125};
  int epochs = 50;
  int batch_size = 2;
  int patience = 10;
  std::uint64_t seed = 0;
  /// Column of the previous-day probability inside a timestep; -1 disables rolling mode.
  int prior_column = static_cast<int>(feature::column(feature::kPriorDefaultProbability));
  nn::RmsPropConfig optimizer{};
  BoostingParams boosting{};

  /// Throws std::invalid_argument listing every violated bound.
  void validate() const;
  nlohmann::json to_json() const;
  static ArchitectureConfig from_json(const nlohmann::json& j);
};

/// Recurrent stack -> last timestep -> dense(1) -> sigmoid.
class Network {
 public:
  explicit Network(const ArchitectureConfig& config);

  /// x holds window x n_features values. Train mode draws dropout masks from `rng`.
  double forward(std::span<const double> x, nn::Mode mode, nn::Rng* rng = nullptr);
  /// Backpropagates dL/d(output) for the sample of the last forward().
  void backward(double dout);

  std::vector<nn::Parameter*> parameters();
  const std::vector<std::unique_ptr<nn::RecurrentLayer>>& layers() const { return layers_; }

 private:
  ArchitectureConfig config_;
  std::vector<std::unique_ptr<nn::RecurrentLayer>> layers_;
  std::vector<double> rates_;
  std::vector<std::vector<double>> masks_;
  nn::Dense dense_;
  std::size_t steps_ = 0;
  double out_ = 0;
};

class Model {
 public:
  explicit Model(const ArchitectureConfig& config);

  const ArchitectureConfig& config() const { return config_; }
  bool neural() const { return network_ != nullptr; }
  Network& network() { return *network_; }
  GradientBoosting& booster() { return *booster_; }
  const GradientBoosting& booster() const { return *booster_; }

  /// Inference on one window (window x n_features).
  double predict(std::span<const float> x);
  std::size_t parameter_count();

 private:
  ArchitectureConfig config_;
  std::unique_ptr<Network> network_;
  std::unique_ptr<GradientBoosting> booster_;
  std::vector<double> buffer_;
};

struct TrainResult {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;  // 0-based
  double best_val = 0;
  bool early_stopped = false;
};

/// Mini-batch RMSProp on the grouped per-bond squared error; keeps the
/// parameters of the epoch with the lowest validation loss.
TrainResult train(Model& model, const WindowedDataset& ds);

/// Grouped per-bond mean squared error of the model over `indices`.
double evaluate_loss(Model& model, const WindowedDataset& ds, std::span<const std::size_t> indices);

/// Predictions for the given samples, one per index.
std::vector<double> predict(Model& model, const WindowedDataset& ds, std::span<const std::size_t> indices);

/// Like predict(), but walks each bond's windows in day order and overwrites
/// the prior column of every timestep with the model's own prediction for the
/// preceding day whenever one exists.
std::vector<double> predict_rolling(Model& model, const WindowedDataset& ds, std::span<const std::size_t> indices);

}  // namespace bondrisk
