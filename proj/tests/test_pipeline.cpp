#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "bondrisk/labeler.hpp"
#include "bondrisk/pipeline.hpp"
#include "bondrisk/synthgen.hpp"
#include "test_util.hpp"

using namespace bondrisk;

namespace {

struct Labeled {
  std::vector<BondRecord> bonds;
  std::vector<LabelSeries> labels;
};

const Labeled& labeled_market() {
  static const Labeled data = [] {
    Labeled d;
    d.bonds = generate_market(test::small_market());
    LabelOptions o;
    o.gmm.components = 6;
    o.gmm.max_iter = 30;
    d.labels = label_bonds(d.bonds, o).labels;
    return d;
  }();
  return data;
}

LabelSeries ramp_labels(const BondRecord& b) {
  LabelSeries s;
  s.bond_id = b.bond_id;
  s.issue_date = b.issue_date;
  for (std::size_t t = 0; t < b.features.rows(); ++t) s.p_integrated.push_back(0.01 * static_cast<double>(t));
  s.p_gmm = s.p_cs = s.p_bwd = s.p_integrated;
  return s;
}

BondRecord counting_bond(const std::string& id, int rows, Outcome o = Outcome::Matured) {
  BondRecord b;
  b.bond_id = id;
  b.issue_date = 0;
  b.end_date = rows - 1;
  b.outcome = o;
  if (o == Outcome::Defaulted) {
    b.default_date = b.end_date;
    b.final_grade = RatingGrade(1);
  }
  b.features = FeatureMatrix(static_cast<std::size_t>(rows), kNumFeatures, 0.0);
  for (int t = 0; t < rows; ++t)
    for (std::size_t c = 0; c < kNumFeatures; ++c)
      b.features(static_cast<std::size_t>(t), c) = 1000.0 * static_cast<double>(c) + t;
  return b;
}

}  // namespace

TEST(Fill, InterpolatesInteriorAndExtendsEdges) {
  const std::vector<double> in{kAbsent, 1.0, kAbsent, kAbsent, 4.0, kAbsent};
  const auto out = fill_series(in);
  const std::vector<double> expect{1.0, 1.0, 2.0, 3.0, 4.0, 4.0};
  EXPECT_EQ(out, expect);
  EXPECT_THROW(fill_series(std::vector<double>{kAbsent, kAbsent}), std::invalid_argument);
  const std::vector<double> full{3.0, 1.0};
  EXPECT_EQ(fill_series(full), full);
}

TEST(Fill, NamesTheEmptyColumn) {
  auto b = counting_bond("x", 5);
  for (std::size_t t = 0; t < 5; ++t) b.features(t, feature::column(feature::kYieldToMaturity)) = kAbsent;
  try {
    fill_missing(b);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("Yield to maturity"), std::string::npos);
  }
}

TEST(Fill, LeavesNoGapsInGeneratedBonds) {
  for (const auto& b : labeled_market().bonds) {
    const auto f = fill_missing(b);
    for (std::size_t c = 0; c < kNumFeatures; ++c) {
      if (static_cast<int>(c) + 1 == feature::kPriorDefaultProbability) continue;
      for (std::size_t t = 0; t < f.features.rows(); ++t) ASSERT_FALSE(is_absent(f.features(t, c)));
    }
  }
}

TEST(Standardize, ZeroMeanUnitPopulationStd) {
  const auto& d = labeled_market();
  for (std::size_t i = 0; i < d.bonds.size(); ++i) {
    const auto filled = with_prior_column(fill_missing(d.bonds[i]), d.labels[i], 0.5);
    const auto s = standardize(filled);
    const std::size_t T = filled.features.rows();
    for (std::size_t c = 0; c < kNumFeatures; ++c) {
      const auto col = s.bond.features.column(c);
      if (static_cast<int>(c) + 1 == feature::kPriorDefaultProbability) {
        EXPECT_EQ(col, filled.features.column(c));
        continue;
      }
      double mean = 0, var = 0;
      for (double v : col) mean += v;
      mean /= static_cast<double>(T);
      for (double v : col) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(T));
      EXPECT_LT(std::abs(mean), 1e-9);
      if (s.scale[c] != 1.0 || sd > 0) {
        EXPECT_LT(std::abs(sd - 1.0), 1e-9) << "column " << c;
      }
    }
  }
}

TEST(Standardize, ConstantColumnBecomesZero) {
  auto b = counting_bond("x", 4);
  for (std::size_t t = 0; t < 4; ++t) b.features(t, 3) = 7.0;
  const auto s = standardize(b);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(s.bond.features(t, 3), 0.0);
  EXPECT_EQ(s.scale[3], 1.0);
  EXPECT_EQ(s.mean[3], 7.0);
  // 0,1,2,3 has mean 1.5 and population sd sqrt(1.25).
  EXPECT_NEAR(s.bond.features(0, 0), -1.5 / std::sqrt(1.25), 1e-15);
}

TEST(Windows, ShapesLabelsAndSkips) {
  std::vector<BondRecord> bonds{counting_bond("a", 6), counting_bond("b", 3), counting_bond("c", 2)};
  std::vector<LabelSeries> labels;
  for (const auto& b : bonds) labels.push_back(ramp_labels(b));
  const auto ds = make_windows(bonds, labels, 2);
  // T - w windows per bond with T > w.
  EXPECT_EQ(ds.size(), 4u + 1u);
  EXPECT_EQ(ds.skipped_bonds, 1);
  EXPECT_EQ(ds.sample_size(), 2 * kNumFeatures);
  // First window of bond a covers days 0 and 1, labeled with day 2.
  EXPECT_EQ(ds.sample(0)[0], 0.0f);
  EXPECT_EQ(ds.sample(0)[kNumFeatures], 1.0f);
  EXPECT_EQ(ds.sample(0)[kNumFeatures + 5], 5001.0f);
  EXPECT_FLOAT_EQ(ds.labels[0], 0.02f);
  EXPECT_FLOAT_EQ(ds.last_labels[0], 0.01f);
  EXPECT_EQ(ds.meta[0].end_day, 1);
  EXPECT_EQ(ds.meta[3].end_day, 4);
  EXPECT_EQ(ds.meta[4].bond_id, "b");
  EXPECT_THROW(make_windows(bonds, labels, 0), std::invalid_argument);
}

TEST(Split, EightyTenTenByBondWithinClass) {
  std::vector<BondRecord> bonds;
  for (int i = 0; i < 40; ++i) bonds.push_back(counting_bond("L" + std::to_string(i), 3));
  for (int i = 0; i < 10; ++i) bonds.push_back(counting_bond("H" + std::to_string(i), 3, Outcome::Defaulted));
  const auto s = split_bonds(bonds, 4);
  ASSERT_EQ(s.size(), 50u);
  auto count = [&](char cls, Split want) {
    int n = 0;
    for (const auto& [id, sp] : s) n += id[0] == cls && sp == want;
    return n;
  };
  EXPECT_EQ(count('L', Split::Train), 32);
  EXPECT_EQ(count('L', Split::Val), 4);
  EXPECT_EQ(count('L', Split::Test), 4);
  EXPECT_EQ(count('H', Split::Train), 8);
  EXPECT_EQ(count('H', Split::Val), 1);
  EXPECT_EQ(count('H', Split::Test), 1);
  EXPECT_EQ(s, split_bonds(bonds, 4));
  EXPECT_NE(s, split_bonds(bonds, 5));
  bonds.resize(42);
  EXPECT_THROW(split_bonds(bonds, 4), std::invalid_argument);
}

TEST(Smote, PlanCyclesSourcesOverNearestNeighbors) {
  // Points on a line at 0, 1, 2, 10, 11: with k = 1 the neighbor of 10 is 11.
  const std::vector<float> rows{0, 1, 2, 10, 11};
  const auto plan = smote_plan(rows, 1, 10, 1, 3);
  ASSERT_EQ(plan.size(), 10u);
  std::set<std::size_t> first_cycle;
  for (std::size_t i = 0; i < 5; ++i) first_cycle.insert(plan[i].source);
  EXPECT_EQ(first_cycle.size(), 5u);
  const std::size_t nn[] = {1, 0, 1, 4, 3};
  for (std::size_t i = 0; i < plan.size(); ++i) {
    EXPECT_EQ(plan[i].neighbor, nn[plan[i].source]);
    EXPECT_GE(plan[i].u, 0.0);
    EXPECT_LT(plan[i].u, 1.0);
    EXPECT_EQ(plan[i].source, plan[i % 5].source);
  }
  EXPECT_THROW(smote_plan(rows, 1, 3, 5, 0), std::invalid_argument);
  EXPECT_TRUE(smote_plan(rows, 1, 0, 1, 0).empty());
}

TEST(Smote, SyntheticRowsLieOnParentSegmentsAndOnlyInTrain) {
  const auto& d = labeled_market();
  PreprocessOptions opt;
  opt.window = 2;
  opt.seed = 9;
  opt.smote.k_neighbors = 3;
  const auto ds = preprocess(d.bonds, d.labels, opt);
  std::size_t high = 0, low = 0, synthetic = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& m = ds.meta[i];
    if (m.synthetic) {
      ++synthetic;
      EXPECT_EQ(m.split, Split::Train);
      EXPECT_EQ(m.risk_class, RiskClass::High);
    }
    if (m.split == Split::Train) (m.risk_class == RiskClass::High ? high : low) += 1;
  }
  EXPECT_GT(synthetic, 0u);
  EXPECT_GE(high, low);
  EXPECT_EQ(ds.count(Split::Test, true), 0u);
  EXPECT_EQ(ds.count(Split::Val, true), 0u);

  // Recompute the plan and check each synthetic row against its parents.
  std::vector<std::size_t> minority;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!ds.meta[i].synthetic && ds.meta[i].split == Split::Train && ds.meta[i].risk_class == RiskClass::High)
      minority.push_back(i);
  std::vector<float> rows;
  for (auto i : minority) rows.insert(rows.end(), ds.sample(i).begin(), ds.sample(i).end());
  const auto plan = smote_plan(rows, ds.sample_size(), synthetic, opt.smote.k_neighbors, opt.seed);
  std::size_t j = ds.size() - synthetic;
  for (const auto& p : plan) {
    const auto a = ds.sample(minority[p.source]);
    const auto b = ds.sample(minority[p.neighbor]);
    const auto s = ds.sample(j);
    const auto u = static_cast<float>(p.u);
    for (std::size_t c = 0; c < s.size(); ++c) ASSERT_EQ(s[c], a[c] + u * (b[c] - a[c]));
    ++j;
  }
}

TEST(Smote, ValidationAndTestProportionsAreUntouched) {
  const auto& d = labeled_market();
  PreprocessOptions opt;
  opt.window = 2;
  opt.seed = 9;
  opt.smote.k_neighbors = 3;
  auto raw = opt;
  raw.smote.target_ratio = 0.0;
  const auto with = preprocess(d.bonds, d.labels, opt);
  const auto without = preprocess(d.bonds, d.labels, raw);
  for (Split s : {Split::Val, Split::Test}) {
    const auto a = with.indices(s);
    const auto b = without.indices(s);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(with.meta[a[i]], without.meta[b[i]]);
  }
}

TEST(Pipeline, NoBondSpansTwoSplits) {
  const auto& d = labeled_market();
  PreprocessOptions opt;
  opt.window = 5;
  opt.smote.k_neighbors = 3;
  const auto ds = preprocess(d.bonds, d.labels, opt);
  std::map<std::string, Split> seen;
  for (const auto& m : ds.meta) {
    auto [it, inserted] = seen.emplace(m.bond_id, m.split);
    EXPECT_EQ(it->second, m.split) << m.bond_id;
  }
}

TEST(Pipeline, DatasetRoundTripsBitExactly) {
  const auto& d = labeled_market();
  PreprocessOptions opt;
  opt.window = 2;
  opt.smote.k_neighbors = 3;
  const auto ds = preprocess(d.bonds, d.labels, opt);
  test::TempDir dir;
  write_dataset(dir.path() / "w.brwd", ds);
  const auto back = read_dataset(dir.path() / "w.brwd");
  EXPECT_TRUE(ds.identical(back));
  EXPECT_EQ(back.registry_hash, default_registry().hash());
}

TEST(Pipeline, IsDeterministicAndOrderIndependent) {
  const auto& d = labeled_market();
  PreprocessOptions opt;
  opt.window = 2;
  opt.smote.target_ratio = 0.0;
  const auto a = preprocess(d.bonds, d.labels, opt);
  auto bonds = d.bonds;
  auto labels = d.labels;
  std::reverse(bonds.begin(), bonds.end());
  std::reverse(labels.begin(), labels.end());
  const auto b = preprocess(bonds, labels, opt);
  ASSERT_EQ(a.size(), b.size());
  // Same windows per bond regardless of bond order.
  std::map<std::pair<std::string, int>, std::size_t> index;
  for (std::size_t i = 0; i < b.size(); ++i) index[{b.meta[i].bond_id, b.meta[i].end_day}] = i;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto j = index.at({a.meta[i].bond_id, a.meta[i].end_day});
    EXPECT_EQ(a.meta[i], b.meta[j]);
    EXPECT_EQ(a.labels[i], b.labels[j]);
    ASSERT_TRUE(std::equal(a.sample(i).begin(), a.sample(i).end(), b.sample(j).begin()));
  }
}

TEST(Pipeline, CorruptDatasetIsRejected) {
  test::TempDir dir;
  const auto p = dir.path() / "bad.brwd";
  std::ofstream(p) << "not a dataset";
  EXPECT_THROW(read_dataset(p), std::runtime_error);
}
