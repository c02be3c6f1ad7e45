#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "bondrisk/pipeline.hpp"
#include "bondrisk/schema.hpp"
#include "bondrisk/synthgen.hpp"
#include "test_util.hpp"

using namespace bondrisk;

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

BondRecord stub_bond(const std::string& id, int issue, int end, int industry, int region,
                     std::optional<int> default_date) {
  BondRecord b;
  b.bond_id = id;
  b.issue_date = issue;
  b.end_date = end;
  b.industry_id = industry;
  b.region_id = region;
  b.default_date = default_date;
  b.outcome = default_date ? Outcome::Defaulted : Outcome::Matured;
  b.features = FeatureMatrix(static_cast<std::size_t>(end - issue + 1), kNumFeatures, 0.0);
  return b;
}

}  // namespace

TEST(Synthgen, CountsFollowTheConfig) {
  const auto cfg = test::small_market();
  const auto bonds = generate_market(cfg);
  ASSERT_EQ(bonds.size(), static_cast<std::size_t>(cfg.n_bonds));
  int high = 0;
  std::set<std::string> ids;
  for (const auto& b : bonds) {
    high += b.risk_class() == RiskClass::High;
    ids.insert(b.bond_id);
    EXPECT_GE(b.trading_days(), cfg.min_life);
    EXPECT_LE(b.trading_days(), cfg.max_life);
    EXPECT_EQ(b.features.rows(), static_cast<std::size_t>(b.trading_days()));
    EXPECT_EQ(b.features.cols(), kNumFeatures);
    EXPECT_EQ(b.latent_grade.size(), b.features.rows());
    EXPECT_LT(b.industry_id, cfg.n_industries);
    EXPECT_LT(b.region_id, cfg.n_regions);
  }
  EXPECT_EQ(high, high_risk_count(cfg));
  EXPECT_EQ(ids.size(), bonds.size());
}

TEST(Synthgen, SameSeedIsBitIdenticalAndSeedsDiffer) {
  const auto a = generate_market(test::small_market(5));
  const auto b = generate_market(test::small_market(5));
  const auto c = generate_market(test::small_market(6));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i].identical(b[i]));
  bool differ = false;
  for (std::size_t i = 0; i < a.size() && !differ; ++i) differ = !a[i].identical(c[i]);
  EXPECT_TRUE(differ);
}

TEST(Synthgen, PriorColumnStartsAbsent) {
  for (const auto& b : generate_market(test::small_market())) {
    const auto col = b.features.column(feature::column(feature::kPriorDefaultProbability));
    EXPECT_TRUE(std::all_of(col.begin(), col.end(), is_absent));
  }
}

TEST(Synthgen, DefaultedBondsWidenTheirSpread) {
  auto cfg = test::small_market(21);
  cfg.n_bonds = 120;
  cfg.default_fraction = 0.5;
  int defaulted = 0;
  int widened = 0;
  for (const auto& raw : generate_market(cfg)) {
    if (raw.outcome != Outcome::Defaulted) continue;
    const auto b = fill_missing(raw);
    const auto s = b.features.column(feature::column(feature::kRiskSpread));
    const std::size_t tenth = std::max<std::size_t>(1, s.size() / 10);
    const std::span<const double> all(s);
    ++defaulted;
    widened += mean_of(all.last(tenth)) > mean_of(all.first(tenth));
  }
  ASSERT_GT(defaulted, 10);
  EXPECT_GE(widened, static_cast<int>(0.95 * defaulted));
}

TEST(Synthgen, MacroColumnsAreSharedAcrossBondsOnTheSameDay) {
  const auto bonds = generate_market(test::small_market());
  std::vector<std::size_t> macro;
  for (const auto& e : default_registry().entries())
    if (e.dimension == Dimension::Macroeconomy) macro.push_back(feature::column(e.id));
  ASSERT_FALSE(macro.empty());
  std::map<std::pair<int, std::size_t>, double> seen;
  int compared = 0;
  for (const auto& b : bonds)
    for (std::size_t t = 0; t < b.features.rows(); ++t)
      for (auto c : macro) {
        const double v = b.features(t, c);
        if (is_absent(v)) continue;
        const auto key = std::make_pair(b.issue_date + static_cast<int>(t), c);
        auto [it, inserted] = seen.emplace(key, v);
        if (!inserted) {
          EXPECT_EQ(it->second, v);
          ++compared;
        }
      }
  EXPECT_GT(compared, 100);
}

TEST(Synthgen, GroupDefaultRatesAreCumulativeDefaultsOverIssued) {
  std::vector<BondRecord> bonds{stub_bond("a", 0, 3, 0, 0, 3), stub_bond("b", 2, 6, 0, 1, std::nullopt),
                                stub_bond("c", 1, 5, 1, 1, 4)};
  compute_group_default_rates(bonds);
  const auto ind = feature::column(feature::kIndustryDefaultRate);
  const auto reg = feature::column(feature::kRegionDefaultRate);
  // Industry 0: a issued day 0, b issued day 2, a defaults day 3.
  EXPECT_EQ(bonds[0].features(0, ind), 0.0);
  EXPECT_EQ(bonds[0].features(2, ind), 0.0);
  EXPECT_EQ(bonds[0].features(3, ind), 0.5);
  EXPECT_EQ(bonds[1].features(4, ind), 0.5);
  // Industry 1: c alone, defaults day 4.
  EXPECT_EQ(bonds[2].features(2, ind), 0.0);
  EXPECT_EQ(bonds[2].features(3, ind), 1.0);
  // Region 1: c issued day 1, b issued day 2, c defaults day 4.
  EXPECT_EQ(bonds[2].features(0, reg), 0.0);
  EXPECT_EQ(bonds[1].features(1, reg), 0.0);
  EXPECT_EQ(bonds[1].features(2, reg), 0.5);
  // Region 0: a alone.
  EXPECT_EQ(bonds[0].features(3, reg), 1.0);
}

TEST(Synthgen, InvalidConfigIsRejected) {
  auto cfg = test::small_market();
  cfg.n_bonds = 0;
  EXPECT_THROW(generate_market(cfg), std::invalid_argument);
  cfg = test::small_market();
  cfg.min_life = cfg.max_life + 1;
  EXPECT_THROW(generate_market(cfg), std::invalid_argument);
  cfg = test::small_market();
  cfg.default_fraction = 1.5;
  EXPECT_THROW(generate_market(cfg), std::invalid_argument);
}
