#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bondrisk/schema.hpp"

namespace bondrisk {

struct VbGmmOptions {
  int components = kNumGrades;
  int max_iter = 200;
  /// Stop once the per-observation ELBO gain drops below this.
  double tol = 1e-6;
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;
  /// Column whose component means order the grades (riskiest first).
  std::size_t risk_column = 0;
};

/// Variational posterior of a diagonal-covariance Gaussian mixture with a
/// symmetric Dirichlet prior on the weights and Normal-Gamma priors on each
/// component's per-dimension mean and precision.
struct GmmModel {
  int K = 0;
  std::size_t dim = 0;

  // Point summaries of the posterior.
  std::vector<double> weights;    // K, sums to 1
  std::vector<double> means;      // K x dim
  std::vector<double> variances;  // K x dim, >= variance floor

  // Posterior hyperparameters.
  std::vector<double> alpha;  // Dirichlet, K
  std::vector<double> beta;   // mean precision scaling, K
  std::vector<double> shape;  // Gamma shape, K
  std::vector<double> rate;   // Gamma rate, K x dim

  // Priors.
  double alpha0 = 0.0;
  double beta0 = 1.0;
  double shape0 = 1.0;
  std::vector<double> mean0;  // dim
  std::vector<double> rate0;  // dim

  /// Grade (1..22) of each component; grade 1 is the highest mean risk coordinate.
  std::vector<int> grade_of;
  std::size_t risk_column = 0;

  /// Raw -> model-space affine map applied by annotate: (x - input_mean) / input_scale.
  std::vector<double> input_mean;
  std::vector<double> input_scale;

  // Per-component constants of log_rho; rebuilt by refresh_cache().
  std::vector<double> log_const;  // K
  std::vector<double> precision;  // K x dim, expected precisions

  std::vector<double> elbo_trace;
  int iterations = 0;
  bool converged = false;

  void refresh_cache();
  /// Unnormalized log responsibilities of a model-space row.
  std::vector<double> log_rho(std::span<const double> row) const;
  std::vector<double> responsibilities(std::span<const double> row) const;
  /// Argmax-responsibility component; exact ties go to the riskier grade.
  int assign(std::span<const double> row) const;
  std::vector<double> to_model_space(std::span<const double> raw) const;
};

/// Rows of `observations` are standardized observations. Throws
/// std::invalid_argument if there are fewer rows than components.
GmmModel fit_vb_gmm(const FeatureMatrix& observations, const VbGmmOptions& options);

/// Grade of rank r (0 = riskiest) among K components, spread over 1..22.
int grade_for_rank(int rank, int K);

}  // namespace bondrisk
