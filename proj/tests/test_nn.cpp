#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "bondrisk/nn/layers.hpp"
#include "bondrisk/nn/loss.hpp"
#include "bondrisk/nn/optim.hpp"
#include "gradcheck.hpp"

using namespace bondrisk;
using namespace bondrisk::nn;

namespace {

void zero_params(std::vector<Parameter*> ps) {
  for (auto* p : ps) p->value.fill(0.0);
}

}  // namespace

TEST(Sigmoid, IsStableAtTheExtremes) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(2.0), 1.0 / (1.0 + std::exp(-2.0)), 1e-16);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
}

TEST(ConvLstm, ZeroWeightsGiveHalfGatesAndZeroState) {
  ConvLstmLayer layer(5, 1, 2, 3);
  zero_params(layer.parameters());
  Sequence x(2, 5, 1.0);
  const auto h = layer.forward(x);
  // g = tanh(0) = 0 so C stays 0 and H = 0.5 * tanh(0) = 0.
  for (double v : h.data) EXPECT_EQ(v, 0.0);
}

TEST(ConvLstm, BiasOnlyCellMatchesHandComputation) {
  ConvLstmLayer layer(3, 1, 1, 3);
  zero_params(layer.parameters());
  // Gate order i, f, c, o.
  layer.bias.value[0] = 0.0;
  layer.bias.value[1] = 0.0;
  layer.bias.value[2] = 1.0;
  layer.bias.value[3] = 0.0;
  const auto h = layer.forward(Sequence(2, 3, 0.0));
  const double c1 = 0.5 * std::tanh(1.0);
  const double c2 = 0.5 * c1 + 0.5 * std::tanh(1.0);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_NEAR(h.at(0)[l], 0.5 * std::tanh(c1), 1e-15);
    EXPECT_NEAR(h.at(1)[l], 0.5 * std::tanh(c2), 1e-15);
  }
}

TEST(ConvLstm, SamePaddingSeesOnlyNeighbors) {
  // Input conv kernel picks the left neighbor into the c-gate.
  ConvLstmLayer layer(4, 1, 1, 3);
  zero_params(layer.parameters());
  layer.wx.value[0 * 4 + 2] = 1.0;  // tap 0 (offset -1), in 0, gate c
  Sequence x(1, 4);
  x.data = {1.0, 2.0, 3.0, 4.0};
  const auto h = layer.forward(x);
  const double expect[] = {0.0, 1.0, 2.0, 3.0};
  for (std::size_t l = 0; l < 4; ++l) EXPECT_NEAR(h.data[l], 0.5 * std::tanh(0.5 * std::tanh(expect[l])), 1e-15);
}

TEST(ConvLstm, InitSetsForgetBiasAndZeroPeepholes) {
  ConvLstmLayer layer(4, 1, 3, 3);
  Rng rng(1);
  layer.init(rng);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(layer.bias.value[k], 0.0);
    EXPECT_EQ(layer.bias.value[3 + k], 1.0);
  }
  for (std::size_t i = 0; i < layer.w_ci.value.size(); ++i) EXPECT_EQ(layer.w_ci.value[i], 0.0);
  for (std::size_t i = 0; i < layer.wx.value.size(); ++i)
    EXPECT_EQ(layer.wx.value[i], static_cast<double>(static_cast<float>(layer.wx.value[i])));
}

TEST(Lstm, OneUnitMatchesHandComputation) {
  LstmLayer layer(1, 1);
  zero_params(layer.parameters());
  // Gate order i, f, c, o.
  layer.wx.value[0] = 0.5;
  layer.wx.value[1] = -0.5;
  layer.wx.value[2] = 1.0;
  layer.wx.value[3] = 0.25;
  layer.wh.value[2] = 0.5;
  layer.bias.value[1] = 1.0;
  Sequence x(2, 1);
  x.data = {1.0, -2.0};
  const auto h = layer.forward(x);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  double hp = 0, cp = 0, expect[2];
  for (int t = 0; t < 2; ++t) {
    const double xt = x.data[static_cast<std::size_t>(t)];
    const double i = sig(0.5 * xt), f = sig(-0.5 * xt + 1.0), g = std::tanh(xt + 0.5 * hp), o = sig(0.25 * xt);
    cp = f * cp + i * g;
    hp = o * std::tanh(cp);
    expect[t] = hp;
  }
  EXPECT_NEAR(h.data[0], expect[0], 1e-15);
  EXPECT_NEAR(h.data[1], expect[1], 1e-15);
}

TEST(Rnn, OneUnitMatchesHandComputation) {
  RnnLayer layer(1, 1);
  layer.wx.value[0] = 0.7;
  layer.wh.value[0] = -0.3;
  layer.bias.value[0] = 0.1;
  Sequence x(2, 1);
  x.data = {1.0, 2.0};
  const auto h = layer.forward(x);
  const double h0 = std::tanh(0.7 + 0.1);
  EXPECT_NEAR(h.data[0], h0, 1e-15);
  EXPECT_NEAR(h.data[1], std::tanh(1.4 - 0.3 * h0 + 0.1), 1e-15);
}

TEST(Dense, ComputesXwPlusB) {
  Dense d(2, 2);
  d.w.value[0] = 1;  // (in 0, out 0)
  d.w.value[1] = 2;
  d.w.value[2] = 3;
  d.w.value[3] = 4;
  d.b.value[0] = 0.5;
  d.b.value[1] = -0.5;
  const std::vector<double> x{1.0, -1.0};
  const auto y = d.forward(x);
  EXPECT_EQ(y[0], 1 - 3 + 0.5);
  EXPECT_EQ(y[1], 2 - 4 - 0.5);
}

class GradientCheck : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(GradientCheck, ConvLstm) {
  ConvLstmLayer layer(8, 2, 3, 3);
  const auto r = gradcheck::check_layer(layer, 3, GetParam());
  EXPECT_TRUE(r.ok()) << r.where << " " << r.worst;
}

TEST_P(GradientCheck, Lstm) {
  LstmLayer layer(5, 4);
  const auto r = gradcheck::check_layer(layer, 3, GetParam());
  EXPECT_TRUE(r.ok()) << r.where << " " << r.worst;
}

TEST_P(GradientCheck, Rnn) {
  RnnLayer layer(5, 4);
  const auto r = gradcheck::check_layer(layer, 3, GetParam());
  EXPECT_TRUE(r.ok()) << r.where << " " << r.worst;
}

TEST_P(GradientCheck, Dense) {
  const auto r = gradcheck::check_dense(6, 3, GetParam());
  EXPECT_TRUE(r.ok()) << r.where << " " << r.worst;
}

TEST_P(GradientCheck, Networks) {
  for (Variant v : {Variant::Ours, Variant::PConvLstm, Variant::Lstm, Variant::Rnn}) {
    const auto r = gradcheck::check_network(v, GetParam());
    EXPECT_TRUE(r.ok()) << to_string(v) << " " << r.where << " " << r.worst;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientCheck, ::testing::Values(1, 2, 3));

TEST(GradientCheck, RelativeErrorFlagsAWrongGradient) {
  const std::vector<double> a{1.0, 2.0}, n{1.0, 2.001};
  EXPECT_GT(gradcheck::relative_error(a, n), 1e-4);
  EXPECT_EQ(gradcheck::relative_error(a, a), 0.0);
}

TEST(Dropout, InferIsIdentityAndTrainKeepsTheExpectation) {
  const std::size_t n = 1000000;
  const std::vector<double> x(n, 1.0);
  EXPECT_EQ(dropout(x, 0.5, Mode::Infer, 3), x);
  for (double rate : {0.125, 0.25, 0.5}) {
    const auto y = dropout(x, rate, Mode::Train, 3);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    EXPECT_NEAR(mean, 1.0, 0.01);
    const auto zeros = std::count(y.begin(), y.end(), 0.0);
    EXPECT_NEAR(static_cast<double>(zeros) / static_cast<double>(n), rate, 0.01);
    for (double v : y) ASSERT_TRUE(v == 0.0 || v == 1.0 / (1.0 - rate));
  }
  EXPECT_EQ(dropout(x, 0.5, Mode::Train, 3), dropout(x, 0.5, Mode::Train, 3));
}

TEST(Loss, MseExamples) {
  EXPECT_EQ(mse_loss({{0.5}}, {{0.5}}), 0.0);
  EXPECT_NEAR(mse_loss({{0.2, 0.4}}, {{0.0, 0.0}}), (0.04 + 0.16) / 2, 1e-15);
  // Two bonds of different length weigh equally.
  EXPECT_NEAR(mse_loss({{1.0}, {0.0, 0.0, 0.0}}, {{0.0}, {0.0, 0.0, 0.0}}), 0.5, 1e-15);
  EXPECT_THROW(mse_loss({{1.0}}, {{1.0, 2.0}}), std::invalid_argument);
}

TEST(Loss, GroupedGradientMatchesFiniteDifferences) {
  std::vector<double> pred{0.1, 0.7, 0.3, 0.9};
  const std::vector<double> label{0.0, 0.5, 0.5, 0.5};
  const std::vector<std::size_t> group{0, 1, 1, 1};
  const auto lg = grouped_mse(pred, label, group);
  EXPECT_NEAR(lg.value, mse_loss({{0.1}, {0.7, 0.3, 0.9}}, {{0.0}, {0.5, 0.5, 0.5}}), 1e-15);
  const auto num = gradcheck::numeric_gradient(pred.data(), pred.size(),
                                               [&] { return grouped_mse(pred, label, group).value; });
  EXPECT_LT(gradcheck::relative_error(lg.grad, num), 1e-9);
  EXPECT_NEAR(lg.grad[0], 2 * 0.1 / 2, 1e-15);
}

TEST(RmsProp, FirstStepsMatchTheUpdateRule) {
  Parameter p("w", {2});
  p.value[0] = 1.0;
  p.value[1] = -1.0;
  RmsPropConfig cfg;
  RmsProp opt(cfg);
  double avg = 0, w = 1.0;
  for (int s = 0; s < 3; ++s) {
    p.grad[0] = 0.5;
    p.grad[1] = 0.0;
    opt.step({&p}, false);
    avg = 0.9 * avg + 0.1 * 0.25;
    w -= 0.001 * 0.5 / (std::sqrt(avg) + 1e-7);
    EXPECT_NEAR(p.value[0], w, 1e-15);
    EXPECT_EQ(p.value[1], -1.0);
    EXPECT_EQ(p.grad[0], 0.0);
  }
  // First step magnitude is lr / sqrt(1 - rho) regardless of the gradient scale.
  Parameter q("q", {1});
  q.grad[0] = 1e3;
  RmsProp fresh(cfg);
  fresh.step({&q}, false);
  EXPECT_NEAR(q.value[0], -0.001 / std::sqrt(0.1), 1e-12);
}

TEST(RmsProp, RoundingKeepsParametersFloatRepresentable) {
  Parameter p("w", {1});
  p.value[0] = 0.1f;
  p.grad[0] = 0.3;
  RmsProp opt;
  opt.step({&p});
  EXPECT_EQ(p.value[0], static_cast<double>(static_cast<float>(p.value[0])));
}

TEST(RmsProp, ConfigValidation) {
  RmsPropConfig c;
  c.rho = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  EXPECT_EQ(RmsPropConfig::from_json(c.to_json()).rho, c.rho);
}
