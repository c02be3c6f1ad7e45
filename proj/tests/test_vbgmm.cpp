#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "bondrisk/labeler.hpp"
#include "bondrisk/vbgmm.hpp"

using namespace bondrisk;

namespace {

// n points per blob, centers 10 apart along every axis, unit noise.
FeatureMatrix blobs(int n_blobs, std::size_t n, std::size_t d, std::uint64_t seed, std::vector<int>* truth) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  FeatureMatrix X(static_cast<std::size_t>(n_blobs) * n, d, 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const int b = static_cast<int>(i % static_cast<std::size_t>(n_blobs));
    for (std::size_t j = 0; j < d; ++j) X(i, j) = 10.0 * (b - (n_blobs - 1) / 2.0) + z(rng);
    if (truth) truth->push_back(b);
  }
  return X;
}

void expect_elbo_monotone(const GmmModel& m) {
  for (std::size_t i = 1; i < m.elbo_trace.size(); ++i)
    EXPECT_GE(m.elbo_trace[i], m.elbo_trace[i - 1] - 1e-8) << "iteration " << i;
}

}  // namespace

TEST(VbGmm, SeparatedBlobsAreRecoveredExactly) {
  for (int n_blobs : {2, 3}) {
    std::vector<int> truth;
    const auto X = blobs(n_blobs, 150, 4, 17, &truth);
    VbGmmOptions opt;
    opt.components = n_blobs;
    opt.seed = 1;
    const auto m = fit_vb_gmm(X, opt);
    expect_elbo_monotone(m);
    std::vector<int> blob_of_component(static_cast<std::size_t>(n_blobs), -1);
    for (std::size_t i = 0; i < X.rows(); ++i) {
      const auto r = m.responsibilities(X.row(i));
      const int k = m.assign(X.row(i));
      EXPECT_GE(r[static_cast<std::size_t>(k)], 0.999);
      auto& b = blob_of_component[static_cast<std::size_t>(k)];
      if (b < 0) b = truth[i];
      EXPECT_EQ(b, truth[i]);
    }
    EXPECT_EQ(std::set<int>(blob_of_component.begin(), blob_of_component.end()).size(),
              static_cast<std::size_t>(n_blobs));
  }
}

TEST(VbGmm, RiskiestComponentGetsGradeOne) {
  const auto X = blobs(3, 100, 2, 4, nullptr);
  VbGmmOptions opt;
  opt.components = 3;
  opt.risk_column = 1;
  const auto m = fit_vb_gmm(X, opt);
  std::vector<int> order(3);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return m.means[static_cast<std::size_t>(a) * m.dim + 1] > m.means[static_cast<std::size_t>(b) * m.dim + 1];
  });
  EXPECT_EQ(m.grade_of[static_cast<std::size_t>(order[0])], 1);
  EXPECT_EQ(m.grade_of[static_cast<std::size_t>(order[2])], kNumGrades);
  EXPECT_NEAR(gmm_probability(m, X.row(0)), grade_to_probability(RatingGrade(m.grade_of[static_cast<std::size_t>(m.assign(X.row(0)))])), 0);
  const double top[] = {100.0, 100.0};
  EXPECT_NEAR(gmm_probability(m, top), 0.99, 1e-6);
  const double bottom[] = {-100.0, -100.0};
  EXPECT_NEAR(gmm_probability(m, bottom), 0.01, 1e-6);
}

TEST(VbGmm, ResponsibilitiesSumToOneAndElboIsMonotone) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  FeatureMatrix X(400, 6, 0.0);
  for (auto& v : X.data()) v = z(rng);
  VbGmmOptions opt;
  opt.components = 7;
  const auto m = fit_vb_gmm(X, opt);
  expect_elbo_monotone(m);
  EXPECT_GT(m.elbo_trace.size(), 1u);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto r = m.responsibilities(X.row(i));
    EXPECT_NEAR(std::accumulate(r.begin(), r.end(), 0.0), 1.0, 1e-9);
  }
  EXPECT_NEAR(std::accumulate(m.weights.begin(), m.weights.end(), 0.0), 1.0, 1e-12);
  for (double v : m.variances) EXPECT_GE(v, opt.variance_floor);
}

TEST(VbGmm, RepeatedRowCollapsesToOneComponent) {
  FeatureMatrix X(2000, 3, 0.25);
  VbGmmOptions opt;
  opt.components = 2;
  const auto m = fit_vb_gmm(X, opt);
  expect_elbo_monotone(m);
  const double small = std::min(m.weights[0], m.weights[1]);
  EXPECT_LT(small, 1e-3);
  for (double v : m.variances) EXPECT_GE(v, opt.variance_floor);
}

TEST(VbGmm, TiesGoToTheRiskierGrade) {
  FeatureMatrix X(40, 1, 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i) X(i, 0) = i % 2 ? 5.0 : -5.0;
  VbGmmOptions opt;
  opt.components = 2;
  auto m = fit_vb_gmm(X, opt);
  // Make both components identical so every row ties.
  m.means[1] = m.means[0];
  m.variances[1] = m.variances[0];
  m.alpha[1] = m.alpha[0];
  m.beta[1] = m.beta[0];
  m.shape[1] = m.shape[0];
  m.rate[1] = m.rate[0];
  m.refresh_cache();
  const double row[] = {1.0};
  const int k = m.assign(row);
  EXPECT_EQ(m.grade_of[static_cast<std::size_t>(k)], 1);
}

TEST(VbGmm, SameSeedIsBitIdentical) {
  const auto X = blobs(3, 60, 3, 2, nullptr);
  VbGmmOptions opt;
  opt.components = 4;
  opt.seed = 12;
  const auto a = fit_vb_gmm(X, opt);
  const auto b = fit_vb_gmm(X, opt);
  EXPECT_EQ(a.means, b.means);
  EXPECT_EQ(a.elbo_trace, b.elbo_trace);
}

TEST(VbGmm, FewerRowsThanComponentsIsRejected) {
  FeatureMatrix X(3, 2, 0.0);
  VbGmmOptions opt;
  opt.components = 4;
  EXPECT_THROW(fit_vb_gmm(X, opt), std::invalid_argument);
}

TEST(VbGmm, GradeRanksSpanTheScale) {
  EXPECT_EQ(grade_for_rank(0, 22), 1);
  EXPECT_EQ(grade_for_rank(21, 22), 22);
  EXPECT_EQ(grade_for_rank(0, 3), 1);
  EXPECT_EQ(grade_for_rank(2, 3), 22);
  EXPECT_EQ(grade_for_rank(1, 3), 12);
}
