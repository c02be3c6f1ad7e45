#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bondrisk/schema.hpp"

namespace bondrisk {

struct MarketConfig {
  int n_bonds = 200;
  /// Share of bonds that default or stay low-rated.
  double default_fraction = 675.0 / 7361.0;
  int min_life = 60;
  int max_life = 250;
  std::uint64_t seed = 7;
  /// Days before default over which issuer fundamentals deteriorate.
  int stress_onset_days = 120;
  /// Probability that an optional cell is left absent.
  double missing_fraction = 0.05;
  int n_industries = 8;
  int n_regions = 6;

  /// Throws std::invalid_argument listing every violated bound.
  void validate() const;
};

/// Seeded synthetic bond market. A pure function of the config.
std::vector<BondRecord> generate_market(const MarketConfig& config);

/// Writes per-day cumulative industry (column 11) and region (column 12)
/// default rates into every bond: defaults on or before the day divided by
/// bonds issued on or before the day, per group.
void compute_group_default_rates(std::vector<BondRecord>& bonds);

/// Number of bonds generate_market assigns to the high-risk class.
int high_risk_count(const MarketConfig& config);

}  // namespace bondrisk
