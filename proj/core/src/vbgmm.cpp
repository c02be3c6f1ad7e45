#include "bondrisk/vbgmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>

namespace bondrisk {
namespace {

using boost::math::digamma;
constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

double sq(double x) { return x * x; }

// k-means++ seeding followed by a few Lloyd passes; returns a hard assignment.
std::vector<int> initial_assignment(const FeatureMatrix& X, int K, std::uint64_t seed) {
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  std::mt19937_64 rng(seed);
  std::vector<double> centers(static_cast<std::size_t>(K) * d);
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());

  auto dist_to = [&](std::size_t i, std::size_t k) {
    double s = 0;
    auto row = X.row(i);
    for (std::size_t j = 0; j < d; ++j) s += sq(row[j] - centers[k * d + j]);
    return s;
  };

  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  std::copy_n(X.row(first).begin(), d, centers.begin());
  for (int k = 1; k < K; ++k) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], dist_to(i, static_cast<std::size_t>(k - 1)));
      total += dist2[i];
    }
    std::size_t pick = 0;
    if (total > 0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick + 1 < n; ++pick) {
        r -= dist2[pick];
        if (r < 0) break;
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    std::copy_n(X.row(pick).begin(), d, centers.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(k) * d));
  }

  std::vector<int> z(n, 0);
  for (int pass = 0; pass < 10; ++pass) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = dist_to(i, 0);
      for (int k = 1; k < K; ++k) {
        const double dk = dist_to(i, static_cast<std::size_t>(k));
        if (dk < best_d) {
          best_d = dk;
          best = k;
        }
      }
      if (pass == 0 || best != z[i]) changed = true;
      z[i] = best;
    }
    if (!changed) break;
    std::vector<double> sum(centers.size(), 0.0);
    std::vector<double> cnt(static_cast<std::size_t>(K), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(z[i]);
      cnt[k] += 1;
      auto row = X.row(i);
      for (std::size_t j = 0; j < d; ++j) sum[k * d + j] += row[j];
    }
    for (std::size_t k = 0; k < cnt.size(); ++k)
      if (cnt[k] > 0)
        for (std::size_t j = 0; j < d; ++j) centers[k * d + j] = sum[k * d + j] / cnt[k];
  }
  return z;
}

class VbFitter {
 public:
  VbFitter(const FeatureMatrix& X, const VbGmmOptions& opt) : X_(X), opt_(opt), n_(X.rows()), d_(X.cols()) {
    K_ = static_cast<std::size_t>(opt.components);
    m_.K = opt.components;
    m_.dim = d_;
    m_.alpha0 = 1.0 / opt.components;
    m_.beta0 = 1.0;
    m_.shape0 = 1.0;
    m_.mean0.assign(d_, 0.0);
    m_.rate0.assign(d_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < d_; ++j) m_.mean0[j] += X(i, j);
    for (auto& v : m_.mean0) v /= static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < d_; ++j) m_.rate0[j] += sq(X(i, j) - m_.mean0[j]);
    for (auto& v : m_.rate0) v = m_.shape0 * std::max(v / static_cast<double>(n_), opt.variance_floor);

    m_.alpha.assign(K_, 0.0);
    m_.beta.assign(K_, 0.0);
    m_.shape.assign(K_, 0.0);
    m_.means.assign(K_ * d_, 0.0);
    m_.rate.assign(K_ * d_, 0.0);
    resp_.assign(n_ * K_, 0.0);
  }

  GmmModel run() {
    const auto z = initial_assignment(X_, opt_.components, opt_.seed);
    for (std::size_t i = 0; i < n_; ++i) resp_[i * K_ + static_cast<std::size_t>(z[i])] = 1.0;
    m_step();
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt_.max_iter; ++it) {
      e_step();
      m_step();
      const double elbo = elbo_value();
      m_.elbo_trace.push_back(elbo);
      m_.iterations = it + 1;
      if ((elbo - prev) / static_cast<double>(n_) < opt_.tol) {
        m_.converged = true;
        break;
      }
      prev = elbo;
    }
    finalize();
    return std::move(m_);
  }

 private:
  void e_step() {
    m_.refresh_cache();
    std::vector<double> lr(K_);
    for (std::size_t i = 0; i < n_; ++i) {
      auto row = X_.row(i);
      lr = m_.log_rho(row);
      const double mx = *std::max_element(lr.begin(), lr.end());
      double s = 0;
      for (auto& v : lr) {
        v = std::exp(v - mx);
        s += v;
      }
      for (std::size_t k = 0; k < K_; ++k) resp_[i * K_ + k] = lr[k] / s;
    }
  }

  void m_step() {
    Nk_.assign(K_, 0.0);
    xbar_.assign(K_ * d_, 0.0);
    S_.assign(K_ * d_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      auto row = X_.row(i);
      for (std::size_t k = 0; k < K_; ++k) {
        const double r = resp_[i * K_ + k];
        if (r == 0.0) continue;
        Nk_[k] += r;
        double* xb = &xbar_[k * d_];
        for (std::size_t j = 0; j < d_; ++j) xb[j] += r * row[j];
      }
    }
    for (std::size_t k = 0; k < K_; ++k)
      if (Nk_[k] > 0)
        for (std::size_t j = 0; j < d_; ++j) xbar_[k * d_ + j] /= Nk_[k];
    for (std::size_t i = 0; i < n_; ++i) {
      auto row = X_.row(i);
      for (std::size_t k = 0; k < K_; ++k) {
        const double r = resp_[i * K_ + k];
        if (r == 0.0) continue;
        double* s = &S_[k * d_];
        const double* xb = &xbar_[k * d_];
        for (std::size_t j = 0; j < d_; ++j) s[j] += r * sq(row[j] - xb[j]);
      }
    }
    for (std::size_t k = 0; k < K_; ++k) {
      const double nk = Nk_[k];
      if (nk > 0)
        for (std::size_t j = 0; j < d_; ++j) S_[k * d_ + j] /= nk;
      m_.alpha[k] = m_.alpha0 + nk;
      m_.beta[k] = m_.beta0 + nk;
      m_.shape[k] = m_.shape0 + 0.5 * nk;
      for (std::size_t j = 0; j < d_; ++j) {
        const double xb = xbar_[k * d_ + j];
        m_.means[k * d_ + j] = (m_.beta0 * m_.mean0[j] + nk * xb) / m_.beta[k];
        m_.rate[k * d_ + j] =
            m_.rate0[j] + 0.5 * (nk * S_[k * d_ + j] + m_.beta0 * nk / (m_.beta0 + nk) * sq(xb - m_.mean0[j]));
      }
    }
  }

  double elbo_value() const {
    const double alpha_sum = std::accumulate(m_.alpha.begin(), m_.alpha.end(), 0.0);
    const double dg_sum = digamma(alpha_sum);
    const double K = static_cast<double>(K_);
    double L = 0;

    // ln C(alpha0 * 1) - ln C(alpha) with ln C(a) = lnG(sum a) - sum lnG(a_k)
    L += std::lgamma(m_.alpha0 * K) - K * std::lgamma(m_.alpha0);
    L -= std::lgamma(alpha_sum);
    for (std::size_t k = 0; k < K_; ++k) L += std::lgamma(m_.alpha[k]);

    for (std::size_t k = 0; k < K_; ++k) {
      const double e_ln_pi = digamma(m_.alpha[k]) - dg_sum;
      const double nk = Nk_[k];
      // E[ln p(Z|pi)] + E[ln p(pi)] - E[ln q(pi)] (normalizers handled above)
      L += (nk + m_.alpha0 - m_.alpha[k]) * e_ln_pi;

      const double a = m_.shape[k];
      const double bk = m_.beta[k];
      const double dg_a = digamma(a);
      for (std::size_t j = 0; j < d_; ++j) {
        const double b = m_.rate[k * d_ + j];
        const double e_ln_lam = dg_a - std::log(b);
        const double e_lam = a / b;
        const double mk = m_.means[k * d_ + j];
        // E[ln p(X|Z,mu,lambda)]
        L += 0.5 * nk * (e_ln_lam - 1.0 / bk - e_lam * (S_[k * d_ + j] + sq(xbar_[k * d_ + j] - mk)) - kLog2Pi);
        // E[ln p(mu|lambda)] - E[ln q(mu|lambda)]
        L += 0.5 * std::log(m_.beta0 / bk) - 0.5 * m_.beta0 / bk - 0.5 * m_.beta0 * e_lam * sq(mk - m_.mean0[j]) + 0.5;
        // E[ln p(lambda)] - E[ln q(lambda)]
        L += m_.shape0 * std::log(m_.rate0[j]) - std::lgamma(m_.shape0) + (m_.shape0 - 1.0) * e_ln_lam -
             m_.rate0[j] * e_lam;
        L -= a * std::log(b) - std::lgamma(a) + (a - 1.0) * e_ln_lam - a;
      }
    }
    // -E[ln q(Z)]
    for (double r : resp_)
      if (r > 0) L -= r * std::log(r);
    return L;
  }

  void finalize() {
    const double alpha_sum = std::accumulate(m_.alpha.begin(), m_.alpha.end(), 0.0);
    m_.weights.resize(K_);
    m_.variances.resize(K_ * d_);
    for (std::size_t k = 0; k < K_; ++k) {
      m_.weights[k] = m_.alpha[k] / alpha_sum;
      for (std::size_t j = 0; j < d_; ++j)
        m_.variances[k * d_ + j] = std::max(m_.rate[k * d_ + j] / m_.shape[k], opt_.variance_floor);
    }
    m_.risk_column = opt_.risk_column;
    std::vector<std::size_t> order(K_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return m_.means[a * d_ + opt_.risk_column] > m_.means[b * d_ + opt_.risk_column];
    });
    m_.grade_of.assign(K_, 0);
    for (std::size_t r = 0; r < K_; ++r) m_.grade_of[order[r]] = grade_for_rank(static_cast<int>(r), opt_.components);
    m_.input_mean.assign(d_, 0.0);
    m_.input_scale.assign(d_, 1.0);
    m_.refresh_cache();
  }

  const FeatureMatrix& X_;
  VbGmmOptions opt_;
  std::size_t n_;
  std::size_t d_;
  std::size_t K_ = 0;
  GmmModel m_;
  std::vector<double> resp_;
  std::vector<double> Nk_;
  std::vector<double> xbar_;
  std::vector<double> S_;
};

}  // namespace

int grade_for_rank(int rank, int K) {
  if (K == kNumGrades) return rank + 1;
  if (K <= 1) return kNumGrades;
  return 1 + static_cast<int>(std::lround(static_cast<double>(rank) * (kNumGrades - 1) / (K - 1)));
}

void GmmModel::refresh_cache() {
  const double alpha_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  const double dg_sum = digamma(alpha_sum);
  log_const.assign(static_cast<std::size_t>(K), 0.0);
  precision.assign(static_cast<std::size_t>(K) * dim, 0.0);
  for (std::size_t k = 0; k < log_const.size(); ++k) {
    const double a = shape[k];
    const double dg_a = digamma(a);
    double ln_det = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      precision[k * dim + j] = a / rate[k * dim + j];
      ln_det += dg_a - std::log(rate[k * dim + j]);
    }
    log_const[k] = digamma(alpha[k]) - dg_sum + 0.5 * ln_det -
                   0.5 * static_cast<double>(dim) * (kLog2Pi + 1.0 / beta[k]);
  }
}

std::vector<double> GmmModel::log_rho(std::span<const double> row) const {
  if (row.size() != dim) throw std::invalid_argument("gmm: row has wrong dimension");
  if (log_const.size() != static_cast<std::size_t>(K)) throw std::logic_error("gmm: refresh_cache() not called");
  std::vector<double> out(static_cast<std::size_t>(K));
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double* mk = &means[k * dim];
    const double* pk = &precision[k * dim];
    double quad = 0;
    for (std::size_t j = 0; j < dim; ++j) quad += pk[j] * sq(row[j] - mk[j]);
    out[k] = log_const[k] - 0.5 * quad;
  }
  return out;
}

std::vector<double> GmmModel::responsibilities(std::span<const double> row) const {
  auto lr = log_rho(row);
  const double mx = *std::max_element(lr.begin(), lr.end());
  double s = 0;
  for (auto& v : lr) {
    v = std::exp(v - mx);
    s += v;
  }
  for (auto& v : lr) v /= s;
  return lr;
}

int GmmModel::assign(std::span<const double> row) const {
  const auto lr = log_rho(row);
  int best = 0;
  for (int k = 1; k < K; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const auto bs = static_cast<std::size_t>(best);
    if (lr[ks] > lr[bs] || (lr[ks] == lr[bs] && grade_of[ks] < grade_of[bs])) best = k;
  }
  return best;
}

std::vector<double> GmmModel::to_model_space(std::span<const double> raw) const {
  if (raw.size() != dim) throw std::invalid_argument("gmm: raw row has wrong dimension");
  std::vector<double> out(dim);
  for (std::size_t j = 0; j < dim; ++j) out[j] = (raw[j] - input_mean[j]) / input_scale[j];
  return out;
}

GmmModel fit_vb_gmm(const FeatureMatrix& observations, const VbGmmOptions& options) {
  if (options.components < 1) throw std::invalid_argument("fit_vb_gmm: need at least one component");
  if (observations.rows() < static_cast<std::size_t>(options.components))
    throw std::invalid_argument("fit_vb_gmm: fewer observations than components");
  if (options.risk_column >= observations.cols()) throw std::invalid_argument("fit_vb_gmm: risk column out of range");
  for (double v : observations.data())
    if (!std::isfinite(v)) throw std::invalid_argument("fit_vb_gmm: non-finite observation");
  return VbFitter(observations, options).run();
}

}  // namespace bondrisk
