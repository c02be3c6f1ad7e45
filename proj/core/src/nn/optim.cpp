#include "bondrisk/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace bondrisk::nn {

void RmsPropConfig::validate() const {
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rmsprop: rho must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("rmsprop: learning rate must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("rmsprop: epsilon must be positive");
}

nlohmann::json RmsPropConfig::to_json() const {
  return {{"rho", rho}, {"learning_rate", learning_rate}, {"epsilon", epsilon}};
}

RmsPropConfig RmsPropConfig::from_json(const nlohmann::json& j) {
  RmsPropConfig c;
  c.rho = j.at("rho").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.validate();
  return c;
}

RmsProp::RmsProp(RmsPropConfig config) : config_(config) { config_.validate(); }

void RmsProp::step(const std::vector<Parameter*>& params, bool round_params) {
  if (avg_.empty())
    for (const auto* p : params) avg_.emplace_back(p->value.shape());
  if (avg_.size() != params.size()) throw std::logic_error("rmsprop: parameter list changed between steps");
  const double rho = config_.rho;
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& a = avg_[k];
    if (a.size() != p.value.size()) throw std::logic_error("rmsprop: parameter " + p.name + " changed shape");
    double* __restrict avg = a.data();
    double* __restrict value = p.value.data();
    double* __restrict grad = p.grad.data();
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      avg[i] = rho * avg[i] + (1.0 - rho) * g * g;
      value[i] -= lr * g / (std::sqrt(avg[i]) + eps);
      grad[i] = 0.0;
    }
    if (round_params)
      for (std::size_t i = 0; i < n; ++i) value[i] = static_cast<double>(static_cast<float>(value[i]));
  }
}

void zero_grad(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->grad.fill(0.0);
}

std::size_t parameter_count(const std::vector<Parameter*>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

}  // namespace bondrisk::nn
