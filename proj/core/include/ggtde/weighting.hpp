#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ggtde/ggd.hpp"

// Batch weighting for temporal-difference losses: inverse-variance weights
// from ensemble disagreement, the effective-sample-size floor on their
// concentration, risk-sensitive shape weights, and the composite training
// loss that combines them.

namespace ggtde {

// Which variance feeds the inverse-variance weights: the ensemble variance
// of the bootstrap values (biv) or of the TD errors themselves (biev).
enum class WeightScheme { biv, biev };

enum class RaMode { none, risk_averse, risk_seeking };

enum class RegLoss { squared, absolute };

// The additive stabilizer xi in 1 / (variance + xi): either a fixed value
// or solved per batch so the normalized weights keep at least
// min_effective_batch effective samples.
struct XiConfig {
  bool solve = true;
  double fixed_value = 0.0;
  std::size_t min_effective_batch = 16;
};

struct WeightingConfig {
  double lambda = 0.1;
  XiConfig xi;
  double discount_gamma = 0.99;
  WeightScheme scheme = WeightScheme::biev;
  RaMode ra_mode = RaMode::risk_averse;
  RegLoss reg_loss = RegLoss::squared;
  // Correct each error variance for the smallness of the critic ensemble
  // before inverting it.
  bool use_mbbe = true;
  std::size_t ensemble_size = 5;
  double mbbe_kappa = 0.0;

  void validate() const;  // throws std::invalid_argument

  // Strict parse: absent fields keep their defaults, unknown fields are
  // rejected with std::invalid_argument.
  static WeightingConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

// One batch of scalar TD diagnostics; all vectors share the batch length.
struct TDErrorBatch {
  std::vector<double> deltas;
  std::vector<double> ensemble_value_variance;  // across critics, bootstrap values
  std::vector<double> ensemble_error_variance;  // across critics, TD errors
  std::vector<double> betas;                    // per-sample shape estimates
  std::vector<double> alphas;                   // per-sample scale estimates

  std::size_t size() const { return deltas.size(); }
  void validate() const;  // throws std::invalid_argument
};

// (sum w)^2 / sum w^2 for nonnegative weights, the usual diversity count.
double effective_sample_size(std::span<const double> weights);

// Smallest xi >= 1e-8 such that the weights 1 / (v_i + xi) keep an
// effective sample size of at least min_effective_batch.  Bisection on an
// upper bracket that is expanded until it satisfies the target, so a
// single enormous variance cannot defeat the floor.
double solve_xi(std::span<const double> raw_variances, std::size_t min_effective_batch);

// Unnormalized weights 1 / (gamma^2 * V[value] + xi).
std::vector<double> biv_weights(const TDErrorBatch& batch, const WeightingConfig& cfg);

// Unnormalized weights 1 / (V[error] + xi) with the error variance first
// passed through the ensemble-size MSE correction (when use_mbbe is set).
std::vector<double> biev_weights(const TDErrorBatch& batch, const WeightingConfig& cfg);

// Unnormalized risk weights: beta_t (averse), 1/beta_t (seeking), 1 (none).
std::vector<double> ra_weights(const TDErrorBatch& batch, RaMode mode);

// w / sum(w); throws std::invalid_argument if the sum is not positive.
std::vector<double> normalize_weights(std::vector<double> w);

struct CompositeLossResult {
  double total = 0.0;
  double attenuation_term = 0.0;     // risk-weighted shape NLL
  double regularization_term = 0.0;  // inverse-variance-weighted error penalty
  std::vector<double> ra_weights_norm;
  std::vector<double> reg_weights_norm;
};

// total = sum_t ra_w_t * nll(delta_t; alpha_t, beta_t)
//       + lambda * sum_t reg_w_t * rho(delta_t)
// with both weight vectors normalized to sum to one and rho given by
// cfg.reg_loss.
CompositeLossResult composite_loss(const TDErrorBatch& batch, const WeightingConfig& cfg,
                                   NllForm form);

struct GaussianBaselineResult {
  double total = 0.0;
  double nll_term = 0.0;             // sum of (delta/sigma)^2 + ln sigma^2
  double regularization_term = 0.0;  // normalized-BIV weighted delta^2
};

// The Gaussian heteroscedastic baseline: per-sample Gaussian NLL against
// predicted sigmas plus the BIV-weighted squared-error penalty.
GaussianBaselineResult gaussian_baseline_loss(const TDErrorBatch& batch,
                                              std::span<const double> sigma_heads,
                                              const WeightingConfig& cfg);

}  // namespace ggtde
