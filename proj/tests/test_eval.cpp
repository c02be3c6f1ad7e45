#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bondrisk/eval.hpp"
#include "test_util.hpp"

using namespace bondrisk;

TEST(Metrics, WorkedExample) {
  const std::vector<double> p{0.1, 0.2}, t{0.1, 0.4};
  const auto m = rmse_mae(p, t);
  EXPECT_NEAR(m.rmse, std::sqrt(0.02), 1e-15);
  EXPECT_NEAR(m.mae, 0.1, 1e-15);
  EXPECT_EQ(m.n, 2u);
  EXPECT_EQ(rmse_mae(t, t).rmse, 0.0);
  EXPECT_THROW(rmse_mae(std::vector<double>{1.0}, t), std::invalid_argument);
}

TEST(Metrics, RmseIsAtLeastMaeAndShufflingHurtsAGoodPredictor) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  std::normal_distribution<double> z(0.0, 0.02);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> t(200), p(200);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = u(rng);
      p[i] = t[i] + z(rng);
    }
    const auto m = rmse_mae(p, t);
    EXPECT_GE(m.rmse, m.mae);
    auto shuffled = t;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_GT(rmse_mae(p, shuffled).rmse, m.rmse);
  }
}

TEST(Regression, RecoversALine) {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto r = ols(x, y);
  EXPECT_NEAR(r.slope, 2.0, 1e-12);
  EXPECT_NEAR(r.intercept, 1.0, 1e-12);
  ASSERT_TRUE(r.r2);
  EXPECT_NEAR(*r.r2, 1.0, 1e-12);
}

TEST(Regression, ConstantInputsLeaveR2Absent) {
  const std::vector<double> c{2, 2, 2}, y{1, 2, 6};
  const auto r = ols(c, y);
  EXPECT_EQ(r.slope, 0.0);
  EXPECT_NEAR(r.intercept, 3.0, 1e-15);
  EXPECT_FALSE(r.r2);
  EXPECT_FALSE(ols(y, c).r2);
}

TEST(Regression, HandComputedFit) {
  // x = 0,1,2; y = 0,2,1: slope 0.5, intercept 0.5, r2 = 0.25.
  const std::vector<double> x{0, 1, 2}, y{0, 2, 1};
  const auto r = ols(x, y);
  EXPECT_NEAR(r.slope, 0.5, 1e-15);
  EXPECT_NEAR(r.intercept, 0.5, 1e-15);
  EXPECT_NEAR(*r.r2, 0.25, 1e-15);
}

TEST(LeadTime, CrossingArithmetic) {
  const std::vector<double> ref{0.1, 0.2, 0.3, 0.6, 0.9};
  const std::vector<double> early{0.1, 0.55, 0.7, 0.8, 0.9};
  const std::vector<double> late{0.1, 0.2, 0.3, 0.4, 0.5};
  const std::vector<double> never{0.1, 0.1, 0.1, 0.1, 0.1};
  EXPECT_EQ(first_crossing(ref).value(), 3u);
  EXPECT_EQ(lead_time(early, ref).value(), 2.0);
  EXPECT_EQ(lead_time(late, ref).value(), -1.0);
  EXPECT_EQ(lead_time(ref, ref).value(), 0.0);
  EXPECT_EQ(lead_time(never, ref).value(), -2.0);
  EXPECT_FALSE(lead_time(ref, never));
}

TEST(LeadTime, MedianOfLeads) {
  EXPECT_EQ(median({3, 1, 2}).value(), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}).value(), 2.5);
  EXPECT_FALSE(median({}));
}

TEST(RatingComparisonTest, PoolsTracksAndCollectsDefaultLeads) {
  BondTrack a{"a", true, {1, 2, 3}, {0.2, 0.6, 0.9}, {0.1, 0.4, 0.7}};
  BondTrack b{"b", false, {1, 2}, {0.1, 0.1}, {0.05, 0.05}};
  const auto r = rating_comparison({a, b});
  ASSERT_EQ(r.leads.size(), 1u);
  EXPECT_EQ(r.leads[0].bond_id, "a");
  EXPECT_EQ(r.leads[0].lead, 1.0);
  EXPECT_EQ(r.median_lead.value(), 1.0);
  EXPECT_EQ(r.regression.n, 5u);
}

TEST(Grid, SummaryUsesSampleStdAndMarksTopTwo) {
  std::vector<EvalResult> results;
  auto add = [&](Variant v, int w, std::uint64_t s, double rmse) {
    EvalResult e;
    e.variant = v;
    e.window = w;
    e.seed = s;
    e.model.rmse = rmse;
    e.model.mae = rmse / 2;
    e.model.n = 10;
    results.push_back(e);
  };
  add(Variant::Ours, 2, 0, 0.1);
  add(Variant::Ours, 2, 1, 0.3);
  add(Variant::Rnn, 2, 0, 0.15);
  add(Variant::Rnn, 2, 1, 0.15);
  add(Variant::Lstm, 2, 0, 0.5);
  add(Variant::Boosting, 2, 0, 0.2);
  const auto g = grid_from_results(results);
  const auto* ours = g.find(Variant::Ours, 2);
  ASSERT_NE(ours, nullptr);
  EXPECT_NEAR(ours->rmse_mean, 0.2, 1e-15);
  EXPECT_NEAR(ours->rmse_std, std::sqrt(0.02), 1e-15);
  EXPECT_EQ(g.find(Variant::Rnn, 2)->rmse_std, 0.0);
  // Means: rnn 0.15, ours 0.2, boosting 0.2, lstm 0.5. Tie broken by variant order.
  EXPECT_TRUE(g.find(Variant::Rnn, 2)->rmse_top2);
  EXPECT_TRUE(ours->rmse_top2);
  EXPECT_FALSE(g.find(Variant::Boosting, 2)->rmse_top2);
  EXPECT_FALSE(g.find(Variant::Lstm, 2)->rmse_top2);
  EXPECT_EQ(g.find(Variant::PConvLstm, 2), nullptr);
}

TEST(EvalCsv, RoundTrips) {
  EvalResult e;
  e.variant = Variant::Rnn;
  e.window = 5;
  e.seed = 3;
  e.dataset_hash = "abc";
  e.model = {0.1, 0.05, 12};
  e.persistence = {0.2, 0.1, 12};
  RatingComparison rc;
  rc.regression = {0.9, 0.01, 0.8, 12};
  rc.median_lead = 4.0;
  rc.leads = {{"x", 4.0}};
  e.rating = rc;
  EvalResult f = e;
  f.rating.reset();
  test::TempDir dir;
  write_eval_csv(dir.path() / "e.csv", {e, f});
  const auto back = read_eval_csv(dir.path() / "e.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].variant, Variant::Rnn);
  EXPECT_EQ(back[0].model.rmse, 0.1);
  EXPECT_EQ(back[0].persistence.mae, 0.1);
  EXPECT_EQ(back[0].rating->median_lead.value(), 4.0);
  EXPECT_EQ(*back[0].rating->regression.r2, 0.8);
  EXPECT_FALSE(back[1].rating);
}
