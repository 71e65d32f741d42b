#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "ggtde/ggd.hpp"

// Variance estimation under non-Gaussian noise: the kurtosis-corrected
// minimum-MSE variance estimator (a shrunk sample variance), its relative
// efficiency, and two reproducible simulation experiments that measure the
// bias of normality-based standard errors and the MSE gain of the
// corrected estimator.

namespace ggtde {

// Bessel-corrected sample variance; needs n >= 2.
double sample_variance(std::span<const double> xs);

// Plug-in excess kurtosis m4 / m2^2 - 3 with biased central moments;
// needs n >= 4 and a nonzero m2.
double sample_excess_kurtosis(std::span<const double> xs);

// Minimum-MSE rescaling of the sample variance:
//
//     s2 / ( kappa / n + (n + 1) / (n - 1) )
//
// where kappa is the excess kurtosis of the sampled distribution.  Pass
// kappa = NaN to estimate it from the sample itself; the plug-in estimate
// is then shrunk by n / (n + 10) toward zero and the denominator floored
// at 0.1, since the fourth-moment estimate is wild at small n.  An
// explicitly supplied kappa that drives the denominator to <= 0 is a
// domain error (it means kappa < -2, impossible for any distribution).
double mbbe_variance(std::span<const double> xs, double kappa);

// MSE(sample variance) / MSE(corrected variance) at the optimum:
// 1 + kappa/n + 2/(n-1).  Needs n >= 2 and kappa >= -2.
double relative_efficiency(std::size_t n, double kappa);

// sd / |mean|; a mean of exactly zero is a domain error.
double coefficient_of_variation(std::span<const double> xs);

// Summary record for one sample.  kurtosis_estimate carries the shrunk
// plug-in value so the mbbe_variance and relative_efficiency fields are
// consistent with it.
struct EstimatorReport {
  std::size_t n = 0;
  double sample_mean = 0.0;
  double sample_variance = 0.0;
  double mbbe_variance = 0.0;
  double kurtosis_estimate = 0.0;
  double relative_efficiency = 0.0;
  double coefficient_of_variation = 0.0;

  // Flat JSON object; serialization round-trips every field exactly.
  std::string to_json() const;
  static EstimatorReport from_json(const std::string& text);

  bool operator==(const EstimatorReport&) const = default;
};

EstimatorReport make_report(std::span<const double> xs);

// Repeatedly draws samples of size n_per_trial from dist, computes the ML
// variance estimate of each, and compares the spread of those estimates
// across trials against the standard error a normality assumption would
// report.  Under heavy tails the normality SE understates the true spread,
// under light tails it overstates it.
struct Prop1Result {
  double true_variance = 0.0;
  double population_kurtosis = 0.0;
  double mean_bias_of_mle_variance = 0.0;
  double empirical_sd = 0.0;   // sd of the variance estimates across trials
  double normality_se = 0.0;   // mean of sqrt(2/n) * estimate
  double ratio = 0.0;          // empirical_sd / normality_se
  double predicted_ratio = 0.0;  // sqrt(kappa/2 + n/(n-1))
  bool sign_matches_kurtosis = false;
};

Prop1Result prop1_bias_experiment(const GGDParams& dist, std::size_t n_per_trial,
                                  std::size_t trials, std::uint64_t seed);

// Measures the MSE of the plain sample variance and of the corrected
// estimator (fed the population kurtosis) against the true variance, and
// compares the empirical MSE ratio to the closed-form relative efficiency.
struct MbbeResult {
  double true_variance = 0.0;
  double population_kurtosis = 0.0;
  double mse_sample_variance = 0.0;
  double mse_mbbe = 0.0;
  double empirical_re = 0.0;
  double formula_re = 0.0;
};

MbbeResult mbbe_optimality_experiment(const GGDParams& dist, std::size_t n_per_trial,
                                      std::size_t trials, std::uint64_t seed);

}  // namespace ggtde
