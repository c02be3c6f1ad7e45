#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bondrisk::nn {

/// Per-bond mean squared error, then mean over bonds:
/// L = (1/N) sum_i (1/T_i) sum_t (pred_it - label_it)^2.
double mse_loss(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& label);

struct LossGrad {
  double value = 0;
  std::vector<double> grad;  // dL/dpred, aligned with the flat input
};

/// Same loss on flat arrays where group[k] names the bond of element k.
LossGrad grouped_mse(std::span<const double> pred, std::span<const double> label, std::span<const std::size_t> group);

}  // namespace bondrisk::nn
