#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace bondrisk {

struct BoostingParams {
  int rounds = 200;
  int max_depth = 3;
  double shrinkage = 0.1;
  int min_leaf = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static BoostingParams from_json(const nlohmann::json& j);
};

struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;
  };
  std::vector<Node> nodes;

  double predict(std::span<const float> x) const;
};

/// Gradient-boosted regression trees with squared-error loss.
class GradientBoosting {
 public:
  explicit GradientBoosting(BoostingParams params = {}) : params_(params) { params_.validate(); }

  /// X is n x d row-major.
  void fit(std::span<const float> X, std::size_t d, std::span<const double> y);
  double predict_raw(std::span<const float> x) const;
  /// Raw prediction clamped into the open unit interval.
  double predict(std::span<const float> x) const;

  const BoostingParams& params() const { return params_; }
  double base() const { return base_; }
  std::size_t n_features() const { return d_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  nlohmann::json to_json() const;
  static GradientBoosting from_json(const nlohmann::json& j);

 private:
  RegressionTree grow(std::span<const float> X, const std::vector<std::vector<std::size_t>>& order,
                      const std::vector<double>& residual) const;

  BoostingParams params_;
  std::size_t d_ = 0;
  double base_ = 0;
  std::vector<RegressionTree> trees_;
};

}  // namespace bondrisk
