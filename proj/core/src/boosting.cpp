#include "bondrisk/boosting.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace bondrisk {

namespace {
constexpr double kProbEdge = 1e-6;
}

void BoostingParams::validate() const {
  std::string errors;
  if (rounds < 0) errors += " rounds must be >= 0;";
  if (max_depth < 1) errors += " max_depth must be >= 1;";
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) errors += " shrinkage must be in (0, 1];";
  if (min_leaf < 1) errors += " min_leaf must be >= 1;";
  if (!errors.empty()) throw std::invalid_argument("boosting:" + errors);
}

nlohmann::json BoostingParams::to_json() const {
  return {{"rounds", rounds}, {"max_depth", max_depth}, {"shrinkage", shrinkage}, {"min_leaf", min_leaf}};
}

BoostingParams BoostingParams::from_json(const nlohmann::json& j) {
  BoostingParams p;
  p.rounds = j.value("rounds", p.rounds);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.shrinkage = j.value("shrinkage", p.shrinkage);
  p.min_leaf = j.value("min_leaf", p.min_leaf);
  p.validate();
  return p;
}

double RegressionTree::predict(std::span<const float> x) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const Node& n = nodes[static_cast<std::size_t>(k)];
    k = static_cast<double>(x[static_cast<std::size_t>(n.feature)]) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

RegressionTree GradientBoosting::grow(std::span<const float> X, const std::vector<std::vector<std::size_t>>& order,
                                      const std::vector<double>& residual) const {
  const std::size_t n = residual.size();
  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<int> node_of(n, 0);
  std::vector<int> frontier{0};

  struct Stats {
    double sum = 0;
    std::size_t count = 0;
  };
  for (int depth = 0; depth <= params_.max_depth && !frontier.empty(); ++depth) {
    std::vector<Stats> total(tree.nodes.size());
    for (std::size_t i = 0; i < n; ++i) {
      total[static_cast<std::size_t>(node_of[i])].sum += residual[i];
      ++total[static_cast<std::size_t>(node_of[i])].count;
    }
    for (int k : frontier) {
      const auto& s = total[static_cast<std::size_t>(k)];
      tree.nodes[static_cast<std::size_t>(k)].value = s.count ? s.sum / static_cast<double>(s.count) : 0.0;
    }
    if (depth == params_.max_depth) break;

    struct Best {
      double gain = 0;
      int feature = -1;
      double threshold = 0;
    };
    std::vector<Best> best(tree.nodes.size());
    std::vector<char> active(tree.nodes.size(), 0);
    for (int k : frontier) active[static_cast<std::size_t>(k)] = 1;
    std::vector<Stats> left(tree.nodes.size());
    std::vector<double> last(tree.nodes.size());
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);

    for (std::size_t f = 0; f < d_; ++f) {
      for (int k : frontier) left[static_cast<std::size_t>(k)] = {};
      for (std::size_t i : order[f]) {
        const auto k = static_cast<std::size_t>(node_of[i]);
        if (!active[k]) continue;
        const double v = X[i * d_ + f];
        Stats& L = left[k];
        const Stats& T = total[k];
        if (L.count >= min_leaf && T.count - L.count >= min_leaf && v > last[k]) {
          const double nl = static_cast<double>(L.count);
          const double nr = static_cast<double>(T.count - L.count);
          const double sr = T.sum - L.sum;
          const double gain = L.sum * L.sum / nl + sr * sr / nr - T.sum * T.sum / static_cast<double>(T.count);
          if (gain > best[k].gain + 1e-12) best[k] = {gain, static_cast<int>(f), 0.5 * (last[k] + v)};
        }
        L.sum += residual[i];
        ++L.count;
        last[k] = v;
      }
    }

    std::vector<int> next;
    for (int k : frontier) {
      const Best& b = best[static_cast<std::size_t>(k)];
      if (b.feature < 0) continue;
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[static_cast<std::size_t>(k)];
      node.feature = b.feature;
      node.threshold = b.threshold;
      node.left = l;
      node.right = l + 1;
      next.push_back(l);
      next.push_back(l + 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& node = tree.nodes[static_cast<std::size_t>(node_of[i])];
      if (node.feature >= 0 && node.left >= 0 && active[static_cast<std::size_t>(node_of[i])])
        node_of[i] = static_cast<double>(X[i * d_ + static_cast<std::size_t>(node.feature)]) <= node.threshold
                         ? node.left
                         : node.right;
    }
    frontier = std::move(next);
  }
  return tree;
}

void GradientBoosting::fit(std::span<const float> X, std::size_t d, std::span<const double> y) {
  const std::size_t n = y.size();
  if (n == 0 || d == 0 || X.size() != n * d) throw std::invalid_argument("boosting: inputs must be n x d with n, d > 0");
  d_ = d;
  trees_.clear();
  base_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  std::vector<std::vector<std::size_t>> order(d, std::vector<std::size_t>(n));
  for (std::size_t f = 0; f < d; ++f) {
    auto& o = order[f];
    std::iota(o.begin(), o.end(), std::size_t{0});
    std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return X[a * d + f] < X[b * d + f]; });
  }

  std::vector<double> pred(n, base_);
  std::vector<double> residual(n);
  for (int r = 0; r < params_.rounds; ++r) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - pred[i];
    RegressionTree tree = grow(X, order, residual);
    for (auto& node : tree.nodes) node.value *= params_.shrinkage;
    for (std::size_t i = 0; i < n; ++i) pred[i] += tree.predict(X.subspan(i * d, d));
    trees_.push_back(std::move(tree));
  }
}

double GradientBoosting::predict_raw(std::span<const float> x) const {
  if (x.size() != d_)
    throw std::invalid_argument("boosting: input width " + std::to_string(x.size()) + ", expected " +
                                std::to_string(d_));
  double p = base_;
  for (const auto& t : trees_) p += t.predict(x);
  return p;
}

double GradientBoosting::predict(std::span<const float> x) const {
  return std::clamp(predict_raw(x), kProbEdge, 1.0 - kProbEdge);
}

nlohmann::json GradientBoosting::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(nodes));
  }
  return {{"params", params_.to_json()}, {"n_features", d_}, {"base", base_}, {"trees", std::move(trees)}};
}

GradientBoosting GradientBoosting::from_json(const nlohmann::json& j) {
  GradientBoosting g(BoostingParams::from_json(j.at("params")));
  g.d_ = j.at("n_features").get<std::size_t>();
  g.base_ = j.at("base").get<double>();
  for (const auto& t : j.at("trees")) {
    RegressionTree tree;
    for (const auto& n : t)
      tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                            n.at(4).get<double>()});
    g.trees_.push_back(std::move(tree));
  }
  return g;
}

}  // namespace bondrisk
