#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "bondrisk/nn/tensor.hpp"

namespace bondrisk::nn {

struct RmsPropConfig {
  double rho = 0.9;
  double learning_rate = 0.001;
  double epsilon = 1e-7;

  void validate() const;
  nlohmann::json to_json() const;
  static RmsPropConfig from_json(const nlohmann::json& j);
};

/// avg <- rho * avg + (1 - rho) * g^2;  theta <- theta - lr * g / (sqrt(avg) + eps).
class RmsProp {
 public:
  explicit RmsProp(RmsPropConfig config = {});

  /// Applies one update and zeroes the gradients. With `round_params` the
  /// updated values are rounded to float32.
  void step(const std::vector<Parameter*>& params, bool round_params = true);

  const RmsPropConfig& config() const { return config_; }
  std::vector<Tensor>& averages() { return avg_; }
  const std::vector<Tensor>& averages() const { return avg_; }

 private:
  RmsPropConfig config_;
  std::vector<Tensor> avg_;
};

void zero_grad(const std::vector<Parameter*>& params);
std::size_t parameter_count(const std::vector<Parameter*>& params);

}  // namespace bondrisk::nn
