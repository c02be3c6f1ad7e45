#include "bondrisk/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace bondrisk {
namespace {

constexpr int kMonth = 21;
constexpr int kQuarter = 63;

// Issuer indicator dynamics in units of the cross-bond spread:
// value = mean + sd * (bond_effect + loading * distress + ar_noise + obs_noise).
struct IssuerFeature {
  int id;
  double mean;
  double sd;
  double loading;
};

constexpr std::array<IssuerFeature, 36> kIssuer{{
    {13, 50.0, 30.0, -1.0},  {14, 40.0, 25.0, -0.5},  {15, 5.0, 4.0, -2.0},    {16, 80.0, 50.0, -0.8},
    {17, 120.0, 80.0, -0.3}, {18, 200.0, 120.0, -0.5}, {19, 60.0, 40.0, 1.0},   {20, 70.0, 50.0, 0.8},
    {21, 130.0, 90.0, 1.0},  {22, 70.0, 40.0, -1.5},  {23, 6.0, 5.0, -2.0},    {24, -5.0, 5.0, 0.5},
    {25, 2.0, 6.0, -2.0},    {26, 3.0, 5.0, -2.0},    {27, 1.4, 0.4, -2.0},    {28, 1.0, 0.35, -2.0},
    {29, 0.5, 0.25, -2.0},   {30, 0.62, 0.1, 2.0},    {31, 1.8, 0.6, 1.5},     {32, 0.3, 0.1, 1.5},
    {33, 0.25, 0.08, -1.5},  {34, 0.08, 0.05, -2.0},  {35, 0.04, 0.02, -2.0},  {36, 0.1, 0.05, -2.0},
    {37, 0.08, 0.05, -2.0},  {38, 200.0, 80.0, 1.5},  {39, 4.0, 2.0, -1.0},    {40, 6.0, 3.0, -1.0},
    {41, 0.8, 0.3, -1.0},    {42, 1.2, 0.5, -0.8},    {43, 0.5, 0.2, -1.0},    {44, 0.5, 0.15, -2.0},
    {45, 0.0, 0.03, -1.5},   {46, 0.2, 0.1, 1.5},     {47, 0.02, 0.008, 2.5},  {53, 0.05, 0.15, -2.0},
}};

// Columns that are always observed: required by the spread estimator, computed, or static.
bool always_observed(int id) {
  switch (id) {
    case feature::kTreasuryRate:
    case feature::kIndustry:
    case feature::kIndustryDefaultRate:
    case feature::kRegionDefaultRate:
    case feature::kResidualMaturity:
    case feature::kYieldToMaturity:
    case feature::kRiskSpread:
    case feature::kPriorDefaultProbability:
      return true;
    default:
      return false;
  }
}

int period_length(Frequency f) {
  switch (f) {
    case Frequency::Monthly:
      return kMonth;
    case Frequency::Quarterly:
      return kQuarter;
    default:
      return 1;
  }
}

struct MacroSpec {
  double mean;
  double sd;  // stationary standard deviation
  double phi;
  double lo;
  double hi;
};

constexpr std::array<MacroSpec, 9> kMacro{{
    {100.0, 1.5, 0.995, 90.0, 110.0},
    {50.0, 1.2, 0.99, 45.0, 55.0},
    {0.2, 0.5, 0.98, -3.0, 3.0},
    {0.2, 0.3, 0.98, -2.0, 2.0},
    {1.5, 0.5, 0.99, -3.0, 4.0},
    {6.8, 0.15, 0.998, 6.0, 7.5},
    {0.028, 0.004, 0.995, 0.01, 0.05},
    {0.03, 0.003, 0.995, 0.015, 0.05},
    {300.0, 8.0, 0.995, 250.0, 350.0},
}};

using Rng = std::mt19937_64;

// Keeps the values on reporting days (calendar day % len == 0, plus both ends)
// and linearly interpolates the days in between.
void interpolate_between_reports(std::vector<double>& v, int first_day, int len) {
  const std::size_t n = v.size();
  std::size_t prev = 0;
  for (std::size_t t = 1; t < n; ++t) {
    const bool report = (first_day + static_cast<int>(t)) % len == 0 || t + 1 == n;
    if (!report) continue;
    const double a = v[prev];
    const double b = v[t];
    for (std::size_t u = prev + 1; u < t; ++u)
      v[u] = a + (b - a) * static_cast<double>(u - prev) / static_cast<double>(t - prev);
    prev = t;
  }
}

std::vector<std::array<double, 9>> draw_macro_path(Rng& rng, int horizon) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<std::array<double, 9>> daily(static_cast<std::size_t>(horizon));
  // AR(1) deviations driven by autocorrelated innovations, so paths trend
  // smoothly instead of jittering day to day. `scale` keeps the stationary
  // standard deviation at m.sd.
  constexpr double kInnovationPhi = 0.95;
  std::array<double, 9> dev{};
  std::array<double, 9> innovation{};
  for (std::size_t k = 0; k < kMacro.size(); ++k) {
    dev[k] = kMacro[k].sd * n01(rng);
    innovation[k] = n01(rng);
  }
  for (int d = 0; d < horizon; ++d) {
    for (std::size_t k = 0; k < kMacro.size(); ++k) {
      const auto& m = kMacro[k];
      const double pq = m.phi * kInnovationPhi;
      const double scale = std::sqrt((1.0 - pq) / (1.0 + pq));
      innovation[k] = kInnovationPhi * innovation[k] + std::sqrt(1.0 - kInnovationPhi * kInnovationPhi) * n01(rng);
      dev[k] = m.phi * dev[k] + m.sd * std::sqrt(1.0 - m.phi * m.phi) * scale * innovation[k];
      daily[static_cast<std::size_t>(d)][k] = std::clamp(m.mean + dev[k], m.lo, m.hi);
    }
    // Social financing stock trends upward.
    daily[static_cast<std::size_t>(d)][8] += 0.05 * d;
  }
  // Low-frequency indicators are unified to daily frequency by linear
  // interpolation between their reporting days.
  const auto& reg = default_registry();
  std::vector<double> series(static_cast<std::size_t>(horizon));
  for (std::size_t k = 0; k < kMacro.size(); ++k) {
    const int len = period_length(reg.by_id(static_cast<int>(k) + 1).native_frequency);
    if (len == 1) continue;
    for (int d = 0; d < horizon; ++d) series[static_cast<std::size_t>(d)] = daily[static_cast<std::size_t>(d)][k];
    interpolate_between_reports(series, 0, len);
    for (int d = 0; d < horizon; ++d) daily[static_cast<std::size_t>(d)][k] = series[static_cast<std::size_t>(d)];
  }
  return daily;
}

int draw_weighted(Rng& rng, const std::vector<std::pair<int, double>>& table) {
  std::vector<double> w;
  for (const auto& [v, p] : table) w.push_back(p);
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  return table[dist(rng)].first;
}

int draw_issue_grade(Rng& rng, Outcome o) {
  switch (o) {
    case Outcome::Matured:
      return draw_weighted(rng, {{14, 2}, {15, 4}, {16, 8}, {17, 20}, {18, 14}, {19, 10}, {20, 10}, {21, 16}, {22, 6}});
    case Outcome::Defaulted:
      return draw_weighted(rng, {{12, 2}, {13, 4}, {14, 6}, {15, 8}, {16, 8}, {17, 6}, {18, 3}, {19, 1}});
    case Outcome::LowRatedActive:
      return draw_weighted(rng, {{8, 2}, {9, 4}, {10, 6}, {11, 6}, {12, 4}, {13, 2}});
  }
  return kNumGrades;
}

double latent_spread(double distress) { return 0.006 + 0.015 * distress + 0.8 * distress * distress * distress; }

struct BondPlan {
  Outcome outcome;
  int life;
  int issue_date;
  int industry;
  int region;
  std::uint64_t seed;
};

BondRecord generate_bond(const MarketConfig& cfg, const BondPlan& plan, std::size_t index,
                         const std::vector<std::array<double, 9>>& macro) {
  Rng rng(plan.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const int T = plan.life;
  const auto rows = static_cast<std::size_t>(T);
  BondRecord b;
  {
    std::ostringstream id;
    id << 'B' << std::setw(5) << std::setfill('0') << index;
    b.bond_id = id.str();
  }
  b.outcome = plan.outcome;
  b.issue_date = plan.issue_date;
  b.end_date = plan.issue_date + T - 1;
  b.industry_id = plan.industry;
  b.region_id = plan.region;
  const int g0 = draw_issue_grade(rng, plan.outcome);
  b.issue_grade = RatingGrade(g0);

  // Latent grade path.
  std::vector<double> grade(rows);
  double dev = 0.0;
  const double lowrated_end = g0 - (1.0 + 3.0 * u01(rng));
  const int stress = std::min(cfg.stress_onset_days, T - 1);
  const int onset = (T - 1) - stress;
  for (int t = 0; t < T; ++t) {
    dev = 0.99 * dev + 0.08 * n01(rng);
    double g = g0 + dev;
    if (plan.outcome == Outcome::LowRatedActive) {
      g += (lowrated_end - g0) * static_cast<double>(t) / std::max(1, T - 1);
    } else if (plan.outcome == Outcome::Defaulted && t > onset) {
      const double s = static_cast<double>(t - onset) / stress;
      const double stable = g0 + dev;
      g = stable - (stable - 1.0) * s * s;
    }
    grade[static_cast<std::size_t>(t)] = std::clamp(g, 1.0, static_cast<double>(kNumGrades));
  }
  if (plan.outcome == Outcome::Defaulted) {
    grade.back() = 1.0;
    b.default_date = b.end_date;
    b.final_grade = RatingGrade(1);
  } else {
    b.final_grade = RatingGrade(std::clamp(static_cast<int>(std::lround(grade.back())), 1, kNumGrades));
  }
  b.latent_grade = grade;

  b.features = FeatureMatrix(rows, kNumFeatures);
  auto set = [&](std::size_t t, int id, double v) { b.features(t, feature::column(id)) = v; };

  // Contractual maturity lies beyond the default date for defaulted bonds.
  const int maturity = b.end_date + (plan.outcome == Outcome::Defaulted ? 20 + static_cast<int>(u01(rng) * 400) : 0);
  const double premium = 0.005 * u01(rng);
  const double volume_base = std::log(50.0) + 0.5 * n01(rng);

  const auto& reg = default_registry();
  std::array<double, kIssuer.size()> bond_effect{};
  std::array<double, kIssuer.size()> ar{};
  for (std::size_t k = 0; k < kIssuer.size(); ++k) {
    bond_effect[k] = n01(rng);
    ar[k] = 0.3 * n01(rng);
  }

  for (std::size_t t = 0; t < rows; ++t) {
    const int day = b.issue_date + static_cast<int>(t);
    const auto& m = macro[static_cast<std::size_t>(day)];
    for (int k = 0; k < 9; ++k) set(t, k + 1, m[static_cast<std::size_t>(k)]);
    set(t, feature::kIndustry, static_cast<double>(b.industry_id));

    const double z = (kNumGrades - grade[t]) / (kNumGrades - 1.0);
    for (std::size_t k = 0; k < kIssuer.size(); ++k) {
      const auto& f = kIssuer[k];
      ar[k] = 0.97 * ar[k] + 0.3 * std::sqrt(1.0 - 0.97 * 0.97) * n01(rng);
      set(t, f.id, f.mean + f.sd * (bond_effect[k] + f.loading * z + ar[k] + 0.3 * n01(rng)));
    }

    set(t, 48, std::exp(volume_base - 1.5 * z + 0.4 * n01(rng)));
    set(t, feature::kResidualMaturity, (maturity - day) / 252.0);
    const double treasury = m[feature::column(feature::kTreasuryRate)];
    const double spread = (latent_spread(z) + premium) * std::exp(0.15 * n01(rng));
    set(t, feature::kYieldToMaturity, treasury + spread);
    set(t, feature::kRiskSpread, spread);
  }

  std::vector<double> series(rows);
  for (const auto& f : kIssuer) {
    const int len = period_length(reg.by_id(f.id).native_frequency);
    if (len == 1) continue;
    const auto c = feature::column(f.id);
    for (std::size_t t = 0; t < rows; ++t) series[t] = b.features(t, c);
    interpolate_between_reports(series, b.issue_date, len);
    for (std::size_t t = 0; t < rows; ++t) b.features(t, c) = series[t];
  }

  for (std::size_t c = 0; c < kNumFeatures; ++c) {
    const int id = static_cast<int>(c) + 1;
    if (always_observed(id)) continue;
    const double first = b.features(0, c);
    bool any_observed = false;
    for (std::size_t t = 0; t < rows; ++t) {
      if (u01(rng) < cfg.missing_fraction)
        b.features(t, c) = kAbsent;
      else
        any_observed = true;
    }
    if (!any_observed) b.features(0, c) = first;
  }
  return b;
}

}  // namespace

void MarketConfig::validate() const {
  std::vector<std::string> errors;
  if (n_bonds < 1) errors.push_back("n_bonds must be >= 1");
  if (!(default_fraction > 0.0 && default_fraction < 1.0)) errors.push_back("default_fraction must be in (0, 1)");
  if (min_life < 30) errors.push_back("min_life must be >= 30");
  if (max_life < min_life) errors.push_back("max_life must be >= min_life");
  if (stress_onset_days < 1) errors.push_back("stress_onset_days must be >= 1");
  if (!(missing_fraction >= 0.0 && missing_fraction < 0.5)) errors.push_back("missing_fraction must be in [0, 0.5)");
  if (n_industries < 1) errors.push_back("n_industries must be >= 1");
  if (n_regions < 1) errors.push_back("n_regions must be >= 1");
  if (!errors.empty()) {
    std::string msg = "invalid market config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::invalid_argument(msg);
  }
}

int high_risk_count(const MarketConfig& config) {
  return static_cast<int>(std::lround(config.n_bonds * config.default_fraction));
}

std::vector<BondRecord> generate_market(const MarketConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int horizon = cfg.max_life + cfg.max_life / 2;
  const auto macro = draw_macro_path(rng, horizon);

  const int n_high = high_risk_count(cfg);
  // Low-rated survivors make up 127 of the 675 high-risk bonds in the reference universe.
  const int n_lowrated = n_high >= 2 ? static_cast<int>(std::lround(n_high * 127.0 / 675.0)) : 0;
  std::vector<Outcome> outcomes(static_cast<std::size_t>(cfg.n_bonds), Outcome::Matured);
  for (int i = 0; i < n_high; ++i)
    outcomes[static_cast<std::size_t>(i)] = i < n_high - n_lowrated ? Outcome::Defaulted : Outcome::LowRatedActive;
  std::shuffle(outcomes.begin(), outcomes.end(), rng);

  // Risky bonds concentrate in the first half of industries and regions.
  std::uniform_int_distribution<int> any_industry(0, cfg.n_industries - 1);
  std::uniform_int_distribution<int> risky_industry(0, std::max(0, cfg.n_industries / 2 - 1));
  std::uniform_int_distribution<int> any_region(0, cfg.n_regions - 1);
  std::uniform_int_distribution<int> risky_region(0, std::max(0, cfg.n_regions / 2 - 1));
  std::bernoulli_distribution coin(0.6);

  std::vector<BondPlan> plans;
  plans.reserve(outcomes.size());
  for (Outcome o : outcomes) {
    BondPlan p{};
    p.outcome = o;
    int lo = cfg.min_life;
    if (o == Outcome::Defaulted) lo = std::clamp(cfg.stress_onset_days + 30, cfg.min_life, cfg.max_life);
    p.life = std::uniform_int_distribution<int>(lo, cfg.max_life)(rng);
    p.issue_date = std::uniform_int_distribution<int>(0, horizon - p.life)(rng);
    const bool risky = o != Outcome::Matured && coin(rng);
    p.industry = risky ? risky_industry(rng) : any_industry(rng);
    p.region = risky ? risky_region(rng) : any_region(rng);
    p.seed = rng();
    plans.push_back(p);
  }

  std::vector<BondRecord> bonds;
  bonds.reserve(plans.size());
  for (std::size_t i = 0; i < plans.size(); ++i) bonds.push_back(generate_bond(cfg, plans[i], i, macro));
  compute_group_default_rates(bonds);
  return bonds;
}

void compute_group_default_rates(std::vector<BondRecord>& bonds) {
  int last_day = 0;
  int max_industry = 0;
  int max_region = 0;
  for (const auto& b : bonds) {
    last_day = std::max(last_day, b.end_date);
    max_industry = std::max(max_industry, b.industry_id);
    max_region = std::max(max_region, b.region_id);
  }
  const auto days = static_cast<std::size_t>(last_day) + 1;

  auto rates_for = [&](auto group_of, int n_groups) {
    std::vector<std::vector<double>> issued(static_cast<std::size_t>(n_groups), std::vector<double>(days, 0.0));
    auto defaulted = issued;
    for (const auto& b : bonds) {
      const auto g = static_cast<std::size_t>(group_of(b));
      if (b.issue_date >= 0 && static_cast<std::size_t>(b.issue_date) < days) issued[g][static_cast<std::size_t>(b.issue_date)] += 1;
      if (b.default_date) defaulted[g][static_cast<std::size_t>(*b.default_date)] += 1;
    }
    std::vector<std::vector<double>> rate(static_cast<std::size_t>(n_groups), std::vector<double>(days, 0.0));
    for (std::size_t g = 0; g < rate.size(); ++g) {
      double n_issued = 0;
      double n_defaulted = 0;
      for (std::size_t d = 0; d < days; ++d) {
        n_issued += issued[g][d];
        n_defaulted += defaulted[g][d];
        rate[g][d] = n_issued > 0 ? n_defaulted / n_issued : 0.0;
      }
    }
    return rate;
  };

  const auto industry = rates_for([](const BondRecord& b) { return b.industry_id; }, max_industry + 1);
  const auto region = rates_for([](const BondRecord& b) { return b.region_id; }, max_region + 1);
  for (auto& b : bonds) {
    for (std::size_t t = 0; t < b.features.rows(); ++t) {
      const auto d = static_cast<std::size_t>(b.issue_date) + t;
      b.features(t, feature::column(feature::kIndustryDefaultRate)) = industry[static_cast<std::size_t>(b.industry_id)][d];
      b.features(t, feature::column(feature::kRegionDefaultRate)) = region[static_cast<std::size_t>(b.region_id)][d];
    }
  }
}

}  // namespace bondrisk
