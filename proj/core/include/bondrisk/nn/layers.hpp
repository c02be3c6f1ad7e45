#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bondrisk/nn/tensor.hpp"

namespace bondrisk::nn {

using Rng = std::mt19937_64;

enum class Mode { Train, Infer };

double sigmoid(double x);

/// Glorot-uniform fill in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, double fan_in, double fan_out, Rng& rng);

/// Recurrent layer run over a whole sequence from a zero (or given) state.
/// forward() caches what backward() needs for the most recent sample.
class RecurrentLayer {
 public:
  virtual ~RecurrentLayer() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t input_width() const = 0;
  virtual std::size_t output_width() const = 0;
  virtual Sequence forward(const Sequence& x) = 0;
  /// Accumulates parameter gradients and returns dL/dx.
  virtual Sequence backward(const Sequence& dy) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
};

/// Convolutional LSTM over a 1-D feature axis of `length` positions.
///
///   i = sig(Conv(W_xi, X) + Conv(W_hi, H_prev) + W_ci . C_prev + b_i)
///   f = sig(Conv(W_xf, X) + Conv(W_hf, H_prev) + W_cf . C_prev + b_f)
///   C = f . C_prev + i . tanh(Conv(W_xc, X) + Conv(W_hc, H_prev) + b_c)
///   o = sig(Conv(W_xo, X) + Conv(W_ho, H_prev) + W_co . C + b_o)
///   H = o . tanh(C)
///
/// Convolutions use same padding. Kernels are stored (kernel, in, 4 * hidden)
/// with gate blocks in i, f, c, o order; peepholes are (length, hidden).
/// Inputs and outputs are position-major: x[l * channels + c].
class ConvLstmLayer final : public RecurrentLayer {
 public:
  ConvLstmLayer(std::size_t length, std::size_t in_channels, std::size_t hidden_channels, std::size_t kernel);

  std::string kind() const override { return "convlstm"; }
  std::size_t input_width() const override { return length_ * in_; }
  std::size_t output_width() const override { return length_ * hidden_; }
  Sequence forward(const Sequence& x) override;
  Sequence backward(const Sequence& dy) override;
  std::vector<Parameter*> parameters() override;

  /// Forward from an explicit initial state. Returns H per step; C per step in `cells`.
  Sequence forward(const Sequence& x, std::span<const double> h0, std::span<const double> c0, Sequence* cells);
  /// Backward that also takes dL/dC per step and returns dL/dH0, dL/dC0.
  Sequence backward(const Sequence& dy, const Sequence* dcells, std::vector<double>* dh0, std::vector<double>* dc0);

  void init(Rng& rng);

  std::size_t length() const { return length_; }
  std::size_t in_channels() const { return in_; }
  std::size_t hidden_channels() const { return hidden_; }
  std::size_t kernel() const { return kernel_; }

  Parameter wx;    // (kernel, in, 4 * hidden)
  Parameter wh;    // (kernel, hidden, 4 * hidden)
  Parameter w_ci;  // (length, hidden)
  Parameter w_cf;
  Parameter w_co;
  Parameter bias;  // (4 * hidden)

 private:
  void conv_forward(const double* in, std::size_t channels, const Tensor& w, double* out) const;
  void conv_backward(const double* in, std::size_t channels, const Tensor& w, Tensor& dw, const double* dout,
                     double* din) const;

  std::size_t length_;
  std::size_t in_;
  std::size_t hidden_;
  std::size_t kernel_;

  struct Step {
    std::vector<double> x, h_prev, c_prev, i, f, g, o, c, tanh_c;
  };
  std::vector<Step> cache_;
};

/// Standard LSTM without peepholes. Weights (in, 4H), (H, 4H), bias 4H; gates i, f, c, o.
class LstmLayer final : public RecurrentLayer {
 public:
  LstmLayer(std::size_t input, std::size_t hidden);

  std::string kind() const override { return "lstm"; }
  std::size_t input_width() const override { return input_; }
  std::size_t output_width() const override { return hidden_; }
  Sequence forward(const Sequence& x) override;
  Sequence backward(const Sequence& dy) override;
  std::vector<Parameter*> parameters() override;
  void init(Rng& rng);

  Parameter wx;
  Parameter wh;
  Parameter bias;

 private:
  std::size_t input_;
  std::size_t hidden_;
  struct Step {
    std::vector<double> x, h_prev, c_prev, i, f, g, o, c, tanh_c;
  };
  std::vector<Step> cache_;
};

/// Elman recurrence h = tanh(W x + U h_prev + b).
class RnnLayer final : public RecurrentLayer {
 public:
  RnnLayer(std::size_t input, std::size_t hidden);

  std::string kind() const override { return "rnn"; }
  std::size_t input_width() const override { return input_; }
  std::size_t output_width() const override { return hidden_; }
  Sequence forward(const Sequence& x) override;
  Sequence backward(const Sequence& dy) override;
  std::vector<Parameter*> parameters() override;
  void init(Rng& rng);

  Parameter wx;
  Parameter wh;
  Parameter bias;

 private:
  std::size_t input_;
  std::size_t hidden_;
  Sequence x_;
  Sequence h_;
};

/// y = x W + b with W stored (in, out).
class Dense {
 public:
  Dense(std::size_t input, std::size_t output);

  std::vector<double> forward(std::span<const double> x);
  /// Accumulates gradients for the input cached by the last forward().
  std::vector<double> backward(std::span<const double> dy);
  std::vector<Parameter*> parameters() { return {&w, &b}; }
  void init(Rng& rng);

  std::size_t input_width() const { return input_; }
  std::size_t output_width() const { return output_; }

  Parameter w;
  Parameter b;

 private:
  std::size_t input_;
  std::size_t output_;
  std::vector<double> x_;
};

/// Inverted-dropout keep mask: 0 with probability `rate`, else 1 / (1 - rate).
std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng);

/// Train mode zeroes elements with probability `rate` and scales survivors
/// by 1 / (1 - rate); infer mode is the identity.
std::vector<double> dropout(std::span<const double> x, double rate, Mode mode, std::uint64_t seed);

}  // namespace bondrisk::nn
