#include "bondrisk/nn/loss.hpp"

#include <map>
#include <stdexcept>

namespace bondrisk::nn {

double mse_loss(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& label) {
  if (pred.size() != label.size() || pred.empty()) throw std::invalid_argument("mse: need matching, non-empty bond lists");
  double total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != label[i].size() || pred[i].empty())
      throw std::invalid_argument("mse: bond " + std::to_string(i) + " has mismatched or empty series");
    double s = 0;
    for (std::size_t t = 0; t < pred[i].size(); ++t) s += (pred[i][t] - label[i][t]) * (pred[i][t] - label[i][t]);
    total += s / static_cast<double>(pred[i].size());
  }
  return total / static_cast<double>(pred.size());
}

LossGrad grouped_mse(std::span<const double> pred, std::span<const double> label, std::span<const std::size_t> group) {
  if (pred.size() != label.size() || pred.size() != group.size() || pred.empty())
    throw std::invalid_argument("mse: need matching, non-empty arrays");
  std::map<std::size_t, std::size_t> counts;
  for (auto g : group) ++counts[g];
  const double n_bonds = static_cast<double>(counts.size());
  std::map<std::size_t, double> sums;
  LossGrad out;
  out.grad.resize(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double e = pred[k] - label[k];
    const double T = static_cast<double>(counts[group[k]]);
    sums[group[k]] += e * e;
    out.grad[k] = 2.0 * e / (n_bonds * T);
  }
  for (const auto& [g, s] : sums) out.value += s / static_cast<double>(counts[g]);
  out.value /= n_bonds;
  return out;
}

}  // namespace bondrisk::nn
