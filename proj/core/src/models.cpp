#include "bondrisk/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "bondrisk/nn/loss.hpp"

namespace bondrisk {

namespace {

constexpr std::uint64_t kShuffleStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kDropoutStream = 0xbf58476d1ce4e5b9ULL;

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Ours: return "ours";
    case Variant::Rnn: return "rnn";
    case Variant::Lstm: return "lstm";
    case Variant::PConvLstm: return "pconvlstm";
    case Variant::Boosting: return "boosting";
  }
  return "?";
}

Variant variant_from_string(std::string_view s) {
  for (Variant v : all_variants())
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown variant '" + std::string(s) + "' (expected ours, rnn, lstm, pconvlstm, boosting)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::Ours, Variant::Rnn, Variant::Lstm, Variant::PConvLstm,
                                      Variant::Boosting};
  return v;
}

void ArchitectureConfig::validate() const {
  std::vector<std::string> errors;
  if (window < 1) errors.push_back("window must be >= 1");
  if (n_features < 1) errors.push_back("n_features must be >= 1");
  if (batch_size < 1) errors.push_back("batch_size must be >= 1");
  if (epochs < 1) errors.push_back("epochs must be >= 1");
  if (patience < 1) errors.push_back("patience must be >= 1");
  if (prior_column < -1 || prior_column >= static_cast<int>(n_features))
    errors.push_back("prior_column must be -1 or a valid feature column");
  if (variant != Variant::Boosting) {
    if (hidden < 1) errors.push_back("hidden must be >= 1");
    if (conv_channels < 1) errors.push_back("conv_channels must be >= 1");
    if (conv_kernel % 2 == 0) errors.push_back("conv_kernel must be odd");
    if (depth < 1) errors.push_back("depth must be >= 1");
    if (dropout.size() != depth) errors.push_back("dropout schedule needs one rate per stacked layer");
    for (double r : dropout)
      if (!(r >= 0.0 && r < 1.0)) {
        errors.push_back("dropout rates must be in [0, 1)");
        break;
      }
  }
  try {
    optimizer.validate();
    boosting.validate();
  } catch (const std::invalid_argument& e) {
    errors.push_back(e.what());
  }
  if (!errors.empty()) {
    std::ostringstream os;
    os << "architecture config:";
    for (const auto& e : errors) os << "\n  " << e;
    throw std::invalid_argument(os.str());
  }
}

nlohmann::json ArchitectureConfig::to_json() const {
  return {{"variant", to_string(variant)},
          {"window", window},
          {"n_features", n_features},
          {"hidden", hidden},
          {"conv_channels", conv_channels},
          {"conv_kernel", conv_kernel},
          {"depth", depth},
          {"dropout", dropout},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"patience", patience},
          {"seed", seed},
          {"prior_column", prior_column},
          {"optimizer", optimizer.to_json()},
          {"boosting", boosting.to_json()}};
}

ArchitectureConfig ArchitectureConfig::from_json(const nlohmann::json& j) {
  ArchitectureConfig c;
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.window = j.at("window").get<int>();
  c.n_features = j.at("n_features").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.conv_channels = j.at("conv_channels").get<std::size_t>();
  c.conv_kernel = j.at("conv_kernel").get<std::size_t>();
  c.depth = j.at("depth").get<std::size_t>();
  c.dropout = j.at("dropout").get<std::vector<double>>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.patience = j.at("patience").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.prior_column = j.at("prior_column").get<int>();
  c.optimizer = nn::RmsPropConfig::from_json(j.at("optimizer"));
  c.boosting = BoostingParams::from_json(j.at("boosting"));
  c.validate();
  return c;
}

// Network -------------------------------------------------------------------

namespace {

std::size_t head_width(const ArchitectureConfig& c) {
  switch (c.variant) {
    case Variant::PConvLstm: return c.n_features * c.conv_channels;
    default: return c.hidden;
  }
}

}  // namespace

Network::Network(const ArchitectureConfig& config) : config_(config), dense_(head_width(config), 1) {
  config_.validate();
  const auto& c = config_;
  nn::Rng rng(c.seed);
  auto conv = [&](std::size_t in) {
    auto l = std::make_unique<nn::ConvLstmLayer>(c.n_features, in, c.conv_channels, c.conv_kernel);
    l->init(rng);
    return l;
  };
  auto lstm = [&](std::size_t in) {
    auto l = std::make_unique<nn::LstmLayer>(in, c.hidden);
    l->init(rng);
    return l;
  };
  switch (c.variant) {
    case Variant::Ours:
      layers_.push_back(conv(1));
      rates_.push_back(0.0);
      for (std::size_t k = 0; k < c.depth; ++k) {
        layers_.push_back(lstm(k == 0 ? c.n_features * c.conv_channels : c.hidden));
        rates_.push_back(c.dropout[k]);
      }
      break;
    case Variant::PConvLstm:
      layers_.push_back(conv(1));
      rates_.push_back(0.0);
      for (std::size_t k = 0; k < c.depth; ++k) {
        layers_.push_back(conv(c.conv_channels));
        rates_.push_back(c.dropout[k]);
      }
      break;
    case Variant::Lstm:
      for (std::size_t k = 0; k < c.depth; ++k) {
        layers_.push_back(lstm(k == 0 ? c.n_features : c.hidden));
        rates_.push_back(c.dropout[k]);
      }
      break;
    case Variant::Rnn:
      for (std::size_t k = 0; k < c.depth; ++k) {
        auto l = std::make_unique<nn::RnnLayer>(k == 0 ? c.n_features : c.hidden, c.hidden);
        l->init(rng);
        layers_.push_back(std::move(l));
        rates_.push_back(c.dropout[k]);
      }
      break;
    case Variant::Boosting:
      throw std::invalid_argument("network: boosting has no neural network");
  }
  dense_.init(rng);
  masks_.resize(layers_.size());
}

std::vector<nn::Parameter*> Network::parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& l : layers_)
    for (auto* p : l->parameters()) out.push_back(p);
  for (auto* p : dense_.parameters()) out.push_back(p);
  return out;
}

double Network::forward(std::span<const double> x, nn::Mode mode, nn::Rng* rng) {
  const std::size_t w = static_cast<std::size_t>(config_.window);
  if (x.size() != w * config_.n_features)
    throw std::invalid_argument("network: sample has " + std::to_string(x.size()) + " values, expected " +
                                std::to_string(w * config_.n_features));
  if (mode == nn::Mode::Train && !rng) throw std::invalid_argument("network: train mode needs a dropout generator");
  nn::Sequence h(w, config_.n_features);
  std::copy(x.begin(), x.end(), h.data.begin());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    h = layers_[k]->forward(h);
    masks_[k].clear();
    if (mode == nn::Mode::Train && rates_[k] > 0.0) {
      masks_[k] = nn::dropout_mask(h.data.size(), rates_[k], *rng);
      for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] *= masks_[k][i];
    }
  }
  steps_ = w;
  const auto z = dense_.forward(std::span<const double>(h.at(w - 1), h.width));
  out_ = nn::sigmoid(z[0]);
  return out_;
}

void Network::backward(double dout) {
  const double dz = dout * out_ * (1.0 - out_);
  const auto dlast = dense_.backward(std::span<const double>(&dz, 1));
  nn::Sequence d(steps_, dlast.size());
  std::copy(dlast.begin(), dlast.end(), d.at(steps_ - 1));
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (!masks_[k].empty())
      for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] *= masks_[k][i];
    d = layers_[k]->backward(d);
  }
}

// Model ---------------------------------------------------------------------

Model::Model(const ArchitectureConfig& config) : config_(config) {
  config_.validate();
  if (config_.variant == Variant::Boosting)
    booster_ = std::make_unique<GradientBoosting>(config_.boosting);
  else
    network_ = std::make_unique<Network>(config_);
}

double Model::predict(std::span<const float> x) {
  if (booster_) return booster_->predict(x);
  buffer_.assign(x.begin(), x.end());
  return network_->forward(buffer_, nn::Mode::Infer);
}

std::size_t Model::parameter_count() {
  if (network_) return nn::parameter_count(network_->parameters());
  std::size_t n = 1;
  for (const auto& t : booster_->trees()) n += t.nodes.size();
  return n;
}

// Training ------------------------------------------------------------------

namespace {

void check_dataset(const Model& model, const WindowedDataset& ds) {
  const auto& c = model.config();
  if (ds.window != c.window || ds.n_features != c.n_features)
    throw std::invalid_argument("dataset has window " + std::to_string(ds.window) + " x " +
                                std::to_string(ds.n_features) + " features, model expects " +
                                std::to_string(c.window) + " x " + std::to_string(c.n_features));
}

}  // namespace

double evaluate_loss(Model& model, const WindowedDataset& ds, std::span<const std::size_t> indices) {
  check_dataset(model, ds);
  if (indices.empty()) throw std::invalid_argument("evaluate_loss: no samples");
  std::map<std::string, std::pair<double, std::size_t>> per_bond;
  for (std::size_t i : indices) {
    const double e = model.predict(ds.sample(i)) - static_cast<double>(ds.labels[i]);
    auto& [sum, n] = per_bond[ds.meta[i].bond_id];
    sum += e * e;
    ++n;
  }
  double total = 0;
  for (const auto& [id, s] : per_bond) total += s.first / static_cast<double>(s.second);
  return total / static_cast<double>(per_bond.size());
}

TrainResult train(Model& model, const WindowedDataset& ds) {
  check_dataset(model, ds);
  const auto& c = model.config();
  auto train_idx = ds.indices(Split::Train);
  const auto val_idx = ds.indices(Split::Val);
  if (train_idx.empty()) throw std::invalid_argument("train: dataset has no training samples");
  TrainResult result;

  if (!model.neural()) {
    std::vector<float> X;
    std::vector<double> y;
    X.reserve(train_idx.size() * ds.sample_size());
    for (std::size_t i : train_idx) {
      auto s = ds.sample(i);
      X.insert(X.end(), s.begin(), s.end());
      y.push_back(ds.labels[i]);
    }
    model.booster().fit(X, ds.sample_size(), y);
    result.train_loss.push_back(evaluate_loss(model, ds, train_idx));
    result.val_loss.push_back(val_idx.empty() ? result.train_loss.back() : evaluate_loss(model, ds, val_idx));
    result.best_epoch = 0;
    result.best_val = result.val_loss.back();
    return result;
  }

  Network& net = model.network();
  const auto params = net.parameters();
  nn::zero_grad(params);
  nn::RmsProp opt(c.optimizer);
  nn::Rng shuffle_rng(c.seed ^ kShuffleStream);
  nn::Rng dropout_rng(c.seed ^ kDropoutStream);
  std::vector<nn::Tensor> best;
  int stale = 0;
  const auto batch = static_cast<std::size_t>(c.batch_size);
  std::vector<double> x;

  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
    double epoch_sum = 0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < train_idx.size(); b0 += batch) {
      const std::size_t b1 = std::min(b0 + batch, train_idx.size());
      std::map<std::string, std::size_t> counts;
      for (std::size_t k = b0; k < b1; ++k) ++counts[ds.meta[train_idx[k]].bond_id];
      const double n_bonds = static_cast<double>(counts.size());
      double loss = 0;
      for (std::size_t k = b0; k < b1; ++k) {
        const std::size_t i = train_idx[k];
        const double coef = 1.0 / (n_bonds * static_cast<double>(counts[ds.meta[i].bond_id]));
        x.assign(ds.sample(i).begin(), ds.sample(i).end());
        const double e = net.forward(x, nn::Mode::Train, &dropout_rng) - static_cast<double>(ds.labels[i]);
        loss += coef * e * e;
        net.backward(2.0 * coef * e);
      }
      if (!std::isfinite(loss))
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(batches + 1) + " (learning rate " +
                             std::to_string(c.optimizer.learning_rate) + ", init seed " + std::to_string(c.seed) +
                             "); lower the learning rate or check inputs for non-finite values");
      opt.step(params);
      epoch_sum += loss;
      ++batches;
    }
    result.train_loss.push_back(epoch_sum / static_cast<double>(batches));
    const double val = val_idx.empty() ? result.train_loss.back() : evaluate_loss(model, ds, val_idx);
    if (!std::isfinite(val))
      throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch + 1));
    result.val_loss.push_back(val);
    if (result.best_epoch < 0 || val < result.best_val) {
      result.best_epoch = epoch;
      result.best_val = val;
      best.clear();
      for (const auto* p : params) best.push_back(p->value);
      stale = 0;
    } else if (++stale >= c.patience) {
      result.early_stopped = true;
      break;
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best[k];
  return result;
}

std::vector<double> predict(Model& model, const WindowedDataset& ds, std::span<const std::size_t> indices) {
  check_dataset(model, ds);
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(model.predict(ds.sample(i)));
  return out;
}

std::vector<double> predict_rolling(Model& model, const WindowedDataset& ds, std::span<const std::size_t> indices) {
  check_dataset(model, ds);
  const int col = model.config().prior_column;
  if (col < 0) return predict(model, ds, indices);
  const std::size_t F = ds.n_features;
  const int w = ds.window;

  std::map<std::string, std::vector<std::size_t>> by_bond;
  for (std::size_t k = 0; k < indices.size(); ++k) by_bond[ds.meta[indices[k]].bond_id].push_back(k);

  std::vector<double> out(indices.size());
  std::vector<float> x;
  for (auto& [id, ks] : by_bond) {
    std::stable_sort(ks.begin(), ks.end(), [&](std::size_t a, std::size_t b) {
      return ds.meta[indices[a]].end_day < ds.meta[indices[b]].end_day;
    });
    std::map<int, double> forecast;  // day -> model probability for that day
    for (std::size_t k : ks) {
      const std::size_t i = indices[k];
      const auto s = ds.sample(i);
      x.assign(s.begin(), s.end());
      const int first_day = ds.meta[i].end_day - w + 1;
      for (int t = 0; t < w; ++t) {
        auto it = forecast.find(first_day + t - 1);
        if (it != forecast.end()) x[static_cast<std::size_t>(t) * F + static_cast<std::size_t>(col)] = static_cast<float>(it->second);
      }
      out[k] = model.predict(x);
      forecast[ds.meta[i].end_day + 1] = out[k];
    }
  }
  return out;
}

}  // namespace bondrisk
