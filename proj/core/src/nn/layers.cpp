#include "bondrisk/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bondrisk::nn {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// y[0:m] += x[0:n] * W with W stored (n, m).
void vec_mat(const double* x, std::size_t n, const double* w, std::size_t m, double* y) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] != 0.0) axpy(x[i], w + i * m, y, m);
}

// dx[0:n] += W * dy; dW += x (outer) dy.
void vec_mat_backward(const double* x, std::size_t n, const double* w, double* dw, std::size_t m, const double* dy,
                      double* dx) {
  for (std::size_t i = 0; i < n; ++i) {
    if (dx) dx[i] += dot(w + i * m, dy, m);
    if (x[i] != 0.0) axpy(x[i], dy, dw + i * m, m);
  }
}

void check_width(const Sequence& x, std::size_t expected, const char* what) {
  if (x.width != expected)
    throw std::invalid_argument(std::string(what) + ": input width " + std::to_string(x.width) + ", expected " +
                                std::to_string(expected));
  if (x.data.size() != x.steps * x.width) throw std::invalid_argument(std::string(what) + ": malformed sequence");
}

void set_forget_bias(Tensor& bias, std::size_t hidden) {
  for (std::size_t k = 0; k < hidden; ++k) bias[hidden + k] = 1.0;
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void glorot_uniform(Tensor& t, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  t.round_to_float();
}

// ConvLSTM ------------------------------------------------------------------

ConvLstmLayer::ConvLstmLayer(std::size_t length, std::size_t in_channels, std::size_t hidden_channels,
                             std::size_t kernel)
    : wx("wx", {kernel, in_channels, 4 * hidden_channels}),
      wh("wh", {kernel, hidden_channels, 4 * hidden_channels}),
      w_ci("w_ci", {length, hidden_channels}),
      w_cf("w_cf", {length, hidden_channels}),
      w_co("w_co", {length, hidden_channels}),
      bias("bias", {4 * hidden_channels}),
      length_(length),
      in_(in_channels),
      hidden_(hidden_channels),
      kernel_(kernel) {
  if (length == 0 || in_channels == 0 || hidden_channels == 0) throw std::invalid_argument("convlstm: zero dimension");
  if (kernel % 2 == 0) throw std::invalid_argument("convlstm: kernel size must be odd for same padding");
  set_forget_bias(bias.value, hidden_);
}

void ConvLstmLayer::init(Rng& rng) {
  const double g = 4.0 * static_cast<double>(hidden_);
  const double k = static_cast<double>(kernel_);
  glorot_uniform(wx.value, k * static_cast<double>(in_), k * g, rng);
  glorot_uniform(wh.value, k * static_cast<double>(hidden_), k * g, rng);
  w_ci.value.fill(0.0);
  w_cf.value.fill(0.0);
  w_co.value.fill(0.0);
  bias.value.fill(0.0);
  set_forget_bias(bias.value, hidden_);
}

std::vector<Parameter*> ConvLstmLayer::parameters() { return {&wx, &wh, &w_ci, &w_cf, &w_co, &bias}; }

void ConvLstmLayer::conv_forward(const double* in, std::size_t channels, const Tensor& w, double* out) const {
  const std::size_t G = 4 * hidden_;
  const auto pad = static_cast<std::ptrdiff_t>(kernel_ / 2);
  const auto L = static_cast<std::ptrdiff_t>(length_);
  for (std::ptrdiff_t l = 0; l < L; ++l)
    for (std::size_t j = 0; j < kernel_; ++j) {
      const std::ptrdiff_t src = l + static_cast<std::ptrdiff_t>(j) - pad;
      if (src < 0 || src >= L) continue;
      vec_mat(in + static_cast<std::size_t>(src) * channels, channels, w.data() + j * channels * G, G,
              out + static_cast<std::size_t>(l) * G);
    }
}

void ConvLstmLayer::conv_backward(const double* in, std::size_t channels, const Tensor& w, Tensor& dw,
                                  const double* dout, double* din) const {
  const std::size_t G = 4 * hidden_;
  const auto pad = static_cast<std::ptrdiff_t>(kernel_ / 2);
  const auto L = static_cast<std::ptrdiff_t>(length_);
  for (std::ptrdiff_t l = 0; l < L; ++l)
    for (std::size_t j = 0; j < kernel_; ++j) {
      const std::ptrdiff_t src = l + static_cast<std::ptrdiff_t>(j) - pad;
      if (src < 0 || src >= L) continue;
      const auto s = static_cast<std::size_t>(src);
      vec_mat_backward(in + s * channels, channels, w.data() + j * channels * G, dw.data() + j * channels * G, G,
                       dout + static_cast<std::size_t>(l) * G, din ? din + s * channels : nullptr);
    }
}

Sequence ConvLstmLayer::forward(const Sequence& x) {
  const std::vector<double> zero(length_ * hidden_, 0.0);
  return forward(x, zero, zero, nullptr);
}

Sequence ConvLstmLayer::forward(const Sequence& x, std::span<const double> h0, std::span<const double> c0,
                                Sequence* cells) {
  check_width(x, input_width(), "convlstm");
  const std::size_t S = length_ * hidden_;
  if (h0.size() != S || c0.size() != S)
    throw std::invalid_argument("convlstm: initial state size " + std::to_string(h0.size()) + "/" +
                                std::to_string(c0.size()) + ", expected " + std::to_string(S));
  const std::size_t H = hidden_;
  const std::size_t G = 4 * H;
  Sequence out(x.steps, S);
  if (cells) *cells = Sequence(x.steps, S);
  cache_.resize(x.steps);
  std::vector<double> h(h0.begin(), h0.end());
  std::vector<double> c(c0.begin(), c0.end());
  std::vector<double> a(length_ * G);

  for (std::size_t t = 0; t < x.steps; ++t) {
    Step& st = cache_[t];
    st.x.assign(x.at(t), x.at(t) + x.width);
    st.h_prev = h;
    st.c_prev = c;
    for (std::size_t l = 0; l < length_; ++l) std::copy(bias.value.data(), bias.value.data() + G, a.data() + l * G);
    conv_forward(st.x.data(), in_, wx.value, a.data());
    conv_forward(st.h_prev.data(), hidden_, wh.value, a.data());

    st.i.resize(S);
    st.f.resize(S);
    st.g.resize(S);
    st.o.resize(S);
    st.c.resize(S);
    st.tanh_c.resize(S);
    for (std::size_t l = 0; l < length_; ++l)
      for (std::size_t k = 0; k < H; ++k) {
        const std::size_t s = l * H + k;
        const double* al = a.data() + l * G;
        const double cp = st.c_prev[s];
        const double ig = sigmoid(al[k] + w_ci.value[s] * cp);
        const double fg = sigmoid(al[H + k] + w_cf.value[s] * cp);
        const double gg = std::tanh(al[2 * H + k]);
        const double cn = fg * cp + ig * gg;
        const double og = sigmoid(al[3 * H + k] + w_co.value[s] * cn);
        const double tc = std::tanh(cn);
        st.i[s] = ig;
        st.f[s] = fg;
        st.g[s] = gg;
        st.o[s] = og;
        st.c[s] = cn;
        st.tanh_c[s] = tc;
        h[s] = og * tc;
        c[s] = cn;
      }
    std::copy(h.begin(), h.end(), out.at(t));
    if (cells) std::copy(c.begin(), c.end(), cells->at(t));
  }
  return out;
}

Sequence ConvLstmLayer::backward(const Sequence& dy) { return backward(dy, nullptr, nullptr, nullptr); }

Sequence ConvLstmLayer::backward(const Sequence& dy, const Sequence* dcells, std::vector<double>* dh0,
                                 std::vector<double>* dc0) {
  const std::size_t S = length_ * hidden_;
  const std::size_t H = hidden_;
  const std::size_t G = 4 * H;
  if (dy.steps != cache_.size() || dy.width != S) throw std::invalid_argument("convlstm: backward shape mismatch");
  Sequence dx(dy.steps, input_width());
  std::vector<double> dh_next(S, 0.0);
  std::vector<double> dc_next(S, 0.0);
  std::vector<double> da(length_ * G);
  std::vector<double> dh_prev(S);

  for (std::size_t t = dy.steps; t-- > 0;) {
    const Step& st = cache_[t];
    for (std::size_t l = 0; l < length_; ++l)
      for (std::size_t k = 0; k < H; ++k) {
        const std::size_t s = l * H + k;
        double* dal = da.data() + l * G;
        const double dh = dy.at(t)[s] + dh_next[s];
        double dc = dc_next[s] + (dcells ? dcells->at(t)[s] : 0.0);
        const double o = st.o[s];
        const double tc = st.tanh_c[s];
        const double dao = dh * tc * o * (1.0 - o);
        dc += dh * o * (1.0 - tc * tc) + dao * w_co.value[s];
        w_co.grad[s] += dao * st.c[s];
        const double i = st.i[s];
        const double f = st.f[s];
        const double g = st.g[s];
        const double cp = st.c_prev[s];
        const double dai = dc * g * i * (1.0 - i);
        const double daf = dc * cp * f * (1.0 - f);
        const double dag = dc * i * (1.0 - g * g);
        w_ci.grad[s] += dai * cp;
        w_cf.grad[s] += daf * cp;
        dc_next[s] = dc * f + dai * w_ci.value[s] + daf * w_cf.value[s];
        dal[k] = dai;
        dal[H + k] = daf;
        dal[2 * H + k] = dag;
        dal[3 * H + k] = dao;
      }
    for (std::size_t l = 0; l < length_; ++l)
      for (std::size_t q = 0; q < G; ++q) bias.grad[q] += da[l * G + q];
    conv_backward(st.x.data(), in_, wx.value, wx.grad, da.data(), dx.at(t));
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    conv_backward(st.h_prev.data(), hidden_, wh.value, wh.grad, da.data(), dh_prev.data());
    dh_next.swap(dh_prev);
  }
  if (dh0) *dh0 = dh_next;
  if (dc0) *dc0 = dc_next;
  return dx;
}

// LSTM ----------------------------------------------------------------------

LstmLayer::LstmLayer(std::size_t input, std::size_t hidden)
    : wx("wx", {input, 4 * hidden}), wh("wh", {hidden, 4 * hidden}), bias("bias", {4 * hidden}), input_(input),
      hidden_(hidden) {
  if (input == 0 || hidden == 0) throw std::invalid_argument("lstm: zero dimension");
  set_forget_bias(bias.value, hidden_);
}

void LstmLayer::init(Rng& rng) {
  glorot_uniform(wx.value, static_cast<double>(input_), 4.0 * static_cast<double>(hidden_), rng);
  glorot_uniform(wh.value, static_cast<double>(hidden_), 4.0 * static_cast<double>(hidden_), rng);
  bias.value.fill(0.0);
  set_forget_bias(bias.value, hidden_);
}

std::vector<Parameter*> LstmLayer::parameters() { return {&wx, &wh, &bias}; }

Sequence LstmLayer::forward(const Sequence& x) {
  check_width(x, input_, "lstm");
  const std::size_t H = hidden_;
  const std::size_t G = 4 * H;
  Sequence out(x.steps, H);
  cache_.resize(x.steps);
  std::vector<double> h(H, 0.0);
  std::vector<double> c(H, 0.0);
  std::vector<double> a(G);
  for (std::size_t t = 0; t < x.steps; ++t) {
    Step& st = cache_[t];
    st.x.assign(x.at(t), x.at(t) + x.width);
    st.h_prev = h;
    st.c_prev = c;
    std::copy(bias.value.data(), bias.value.data() + G, a.begin());
    vec_mat(st.x.data(), input_, wx.value.data(), G, a.data());
    vec_mat(st.h_prev.data(), H, wh.value.data(), G, a.data());
    st.i.resize(H);
    st.f.resize(H);
    st.g.resize(H);
    st.o.resize(H);
    st.c.resize(H);
    st.tanh_c.resize(H);
    for (std::size_t k = 0; k < H; ++k) {
      st.i[k] = sigmoid(a[k]);
      st.f[k] = sigmoid(a[H + k]);
      st.g[k] = std::tanh(a[2 * H + k]);
      st.o[k] = sigmoid(a[3 * H + k]);
      st.c[k] = st.f[k] * st.c_prev[k] + st.i[k] * st.g[k];
      st.tanh_c[k] = std::tanh(st.c[k]);
      c[k] = st.c[k];
      h[k] = st.o[k] * st.tanh_c[k];
    }
    std::copy(h.begin(), h.end(), out.at(t));
  }
  return out;
}

Sequence LstmLayer::backward(const Sequence& dy) {
  const std::size_t H = hidden_;
  const std::size_t G = 4 * H;
  if (dy.steps != cache_.size() || dy.width != H) throw std::invalid_argument("lstm: backward shape mismatch");
  Sequence dx(dy.steps, input_);
  std::vector<double> dh_next(H, 0.0);
  std::vector<double> dc_next(H, 0.0);
  std::vector<double> da(G);
  std::vector<double> dh_prev(H);
  for (std::size_t t = dy.steps; t-- > 0;) {
    const Step& st = cache_[t];
    for (std::size_t k = 0; k < H; ++k) {
      const double dh = dy.at(t)[k] + dh_next[k];
      const double o = st.o[k];
      const double tc = st.tanh_c[k];
      const double dc = dc_next[k] + dh * o * (1.0 - tc * tc);
      const double i = st.i[k];
      const double f = st.f[k];
      const double g = st.g[k];
      da[k] = dc * g * i * (1.0 - i);
      da[H + k] = dc * st.c_prev[k] * f * (1.0 - f);
      da[2 * H + k] = dc * i * (1.0 - g * g);
      da[3 * H + k] = dh * tc * o * (1.0 - o);
      dc_next[k] = dc * f;
    }
    axpy(1.0, da.data(), bias.grad.data(), G);
    vec_mat_backward(st.x.data(), input_, wx.value.data(), wx.grad.data(), G, da.data(), dx.at(t));
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    vec_mat_backward(st.h_prev.data(), H, wh.value.data(), wh.grad.data(), G, da.data(), dh_prev.data());
    dh_next.swap(dh_prev);
  }
  return dx;
}

// RNN -----------------------------------------------------------------------

RnnLayer::RnnLayer(std::size_t input, std::size_t hidden)
    : wx("wx", {input, hidden}), wh("wh", {hidden, hidden}), bias("bias", {hidden}), input_(input), hidden_(hidden) {
  if (input == 0 || hidden == 0) throw std::invalid_argument("rnn: zero dimension");
}

void RnnLayer::init(Rng& rng) {
  glorot_uniform(wx.value, static_cast<double>(input_), static_cast<double>(hidden_), rng);
  glorot_uniform(wh.value, static_cast<double>(hidden_), static_cast<double>(hidden_), rng);
  bias.value.fill(0.0);
}

std::vector<Parameter*> RnnLayer::parameters() { return {&wx, &wh, &bias}; }

Sequence RnnLayer::forward(const Sequence& x) {
  check_width(x, input_, "rnn");
  const std::size_t H = hidden_;
  x_ = x;
  h_ = Sequence(x.steps, H);
  std::vector<double> prev(H, 0.0);
  for (std::size_t t = 0; t < x.steps; ++t) {
    double* h = h_.at(t);
    std::copy(bias.value.data(), bias.value.data() + H, h);
    vec_mat(x.at(t), input_, wx.value.data(), H, h);
    vec_mat(prev.data(), H, wh.value.data(), H, h);
    for (std::size_t k = 0; k < H; ++k) h[k] = std::tanh(h[k]);
    prev.assign(h, h + H);
  }
  return h_;
}

Sequence RnnLayer::backward(const Sequence& dy) {
  const std::size_t H = hidden_;
  if (dy.steps != h_.steps || dy.width != H) throw std::invalid_argument("rnn: backward shape mismatch");
  Sequence dx(dy.steps, input_);
  std::vector<double> dh_next(H, 0.0);
  std::vector<double> da(H);
  const std::vector<double> zero(H, 0.0);
  for (std::size_t t = dy.steps; t-- > 0;) {
    const double* h = h_.at(t);
    for (std::size_t k = 0; k < H; ++k) da[k] = (dy.at(t)[k] + dh_next[k]) * (1.0 - h[k] * h[k]);
    axpy(1.0, da.data(), bias.grad.data(), H);
    vec_mat_backward(x_.at(t), input_, wx.value.data(), wx.grad.data(), H, da.data(), dx.at(t));
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    const double* prev = t > 0 ? h_.at(t - 1) : zero.data();
    vec_mat_backward(prev, H, wh.value.data(), wh.grad.data(), H, da.data(), dh_next.data());
  }
  return dx;
}

// Dense ---------------------------------------------------------------------

Dense::Dense(std::size_t input, std::size_t output)
    : w("w", {input, output}), b("b", {output}), input_(input), output_(output) {
  if (input == 0 || output == 0) throw std::invalid_argument("dense: zero dimension");
}

void Dense::init(Rng& rng) {
  glorot_uniform(w.value, static_cast<double>(input_), static_cast<double>(output_), rng);
  b.value.fill(0.0);
}

std::vector<double> Dense::forward(std::span<const double> x) {
  if (x.size() != input_)
    throw std::invalid_argument("dense: input width " + std::to_string(x.size()) + ", expected " +
                                std::to_string(input_));
  x_.assign(x.begin(), x.end());
  std::vector<double> y(b.value.data(), b.value.data() + output_);
  vec_mat(x_.data(), input_, w.value.data(), output_, y.data());
  return y;
}

std::vector<double> Dense::backward(std::span<const double> dy) {
  if (dy.size() != output_) throw std::invalid_argument("dense: backward shape mismatch");
  std::vector<double> dx(input_, 0.0);
  axpy(1.0, dy.data(), b.grad.data(), output_);
  vec_mat_backward(x_.data(), input_, w.value.data(), w.grad.data(), output_, dy.data(), dx.data());
  return dx;
}

// Dropout -------------------------------------------------------------------

std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  std::vector<double> mask(n, 1.0);
  if (rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& m : mask) m = u(rng) < rate ? 0.0 : keep;
  return mask;
}

std::vector<double> dropout(std::span<const double> x, double rate, Mode mode, std::uint64_t seed) {
  std::vector<double> y(x.begin(), x.end());
  if (mode == Mode::Infer) {
    if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    return y;
  }
  Rng rng(seed);
  const auto mask = dropout_mask(x.size(), rate, rng);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return y;
}

}  // namespace bondrisk::nn
