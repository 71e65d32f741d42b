#include "ggtde/estimators.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ggtde {

namespace {

double mean_of(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

}  // namespace

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) throw std::domain_error("sample_variance: need at least 2 values");
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

double sample_excess_kurtosis(std::span<const double> xs) {
  if (xs.size() < 4) throw std::domain_error("sample_excess_kurtosis: need at least 4 values");
  const double m = mean_of(xs);
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : xs) {
    const double d = x - m;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  const double n = static_cast<double>(xs.size());
  m2 /= n;
  m4 /= n;
  if (m2 == 0.0) {
    throw std::domain_error("sample_excess_kurtosis: sample has zero variance");
  }
  return m4 / (m2 * m2) - 3.0;
}

double mbbe_variance(std::span<const double> xs, double kappa) {
  if (xs.size() < 2) throw std::domain_error("mbbe_variance: need at least 2 values");
  const double n = static_cast<double>(xs.size());
  const double s2 = sample_variance(xs);
  if (std::isnan(kappa)) {
    if (s2 == 0.0) return 0.0;  // shrinking zero is zero whatever kappa is
    const double shrink = n / (n + 10.0);
    const double k_hat = sample_excess_kurtosis(xs) * shrink;
    const double denom = std::max(k_hat / n + (n + 1.0) / (n - 1.0), 0.1);
    return s2 / denom;
  }
  const double denom = kappa / n + (n + 1.0) / (n - 1.0);
  if (denom <= 0.0) {
    throw std::domain_error("mbbe_variance: kappa=" + std::to_string(kappa) +
                            " drives the correction denominator to " + std::to_string(denom) +
                            "; no distribution has excess kurtosis below -2");
  }
  return s2 / denom;
}

double relative_efficiency(std::size_t n, double kappa) {
  if (n < 2) throw std::domain_error("relative_efficiency: need n >= 2");
  if (!(kappa >= -2.0)) {
    throw std::domain_error("relative_efficiency: kappa must be >= -2, got " +
                            std::to_string(kappa));
  }
  const double nd = static_cast<double>(n);
  return 1.0 + kappa / nd + 2.0 / (nd - 1.0);
}

double coefficient_of_variation(std::span<const double> xs) {
  const double m = mean_of(xs);
  if (m == 0.0) {
    throw std::domain_error("coefficient_of_variation: mean is zero");
  }
  return std::sqrt(sample_variance(xs)) / std::fabs(m);
}

std::string EstimatorReport::to_json() const {
  nlohmann::json j{{"n", n},
                   {"sample_mean", sample_mean},
                   {"sample_variance", sample_variance},
                   {"mbbe_variance", mbbe_variance},
                   {"kurtosis_estimate", kurtosis_estimate},
                   {"relative_efficiency", relative_efficiency},
                   {"coefficient_of_variation", coefficient_of_variation}};
  return j.dump(2);
}

EstimatorReport EstimatorReport::from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    EstimatorReport r;
    r.n = j.at("n").get<std::size_t>();
    r.sample_mean = j.at("sample_mean").get<double>();
    r.sample_variance = j.at("sample_variance").get<double>();
    r.mbbe_variance = j.at("mbbe_variance").get<double>();
    r.kurtosis_estimate = j.at("kurtosis_estimate").get<double>();
    r.relative_efficiency = j.at("relative_efficiency").get<double>();
    r.coefficient_of_variation = j.at("coefficient_of_variation").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("EstimatorReport: bad JSON: ") + e.what());
  }
}

EstimatorReport make_report(std::span<const double> xs) {
  if (xs.size() < 4) throw std::domain_error("make_report: need at least 4 values");
  EstimatorReport r;
  r.n = xs.size();
  r.sample_mean = mean_of(xs);
  r.sample_variance = sample_variance(xs);
  r.mbbe_variance = mbbe_variance(xs, std::nan(""));
  const double nd = static_cast<double>(xs.size());
  r.kurtosis_estimate = sample_excess_kurtosis(xs) * nd / (nd + 10.0);
  r.relative_efficiency = relative_efficiency(xs.size(), std::max(r.kurtosis_estimate, -2.0));
  r.coefficient_of_variation = coefficient_of_variation(xs);
  return r;
}

namespace {

// Numerically stable streaming mean/variance over trial statistics.
struct Welford {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  double variance() const { return m2 / static_cast<double>(count - 1); }
};

void validate_experiment_args(std::size_t n_per_trial, std::size_t trials) {
  if (n_per_trial < 4) throw std::domain_error("experiment: need n_per_trial >= 4");
  if (trials < 100) throw std::domain_error("experiment: need at least 100 trials");
}

}  // namespace

Prop1Result prop1_bias_experiment(const GGDParams& dist, std::size_t n_per_trial,
                                  std::size_t trials, std::uint64_t seed) {
  validate_params(dist);
  validate_experiment_args(n_per_trial, trials);

  Rng rng(seed);
  const double nd = static_cast<double>(n_per_trial);
  std::vector<double> xs(n_per_trial);

  Welford var_hat_stats;
  double se_sum = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (double& x : xs) x = sample_one(dist, rng);
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    const double var_mle = ss / nd;
    var_hat_stats.add(var_mle);
    // The SE a Gaussian model would attach to its own variance estimate.
    se_sum += std::sqrt(2.0 / nd) * var_mle;
  }

  Prop1Result res;
  res.true_variance = variance(dist);
  res.population_kurtosis = excess_kurtosis(dist.beta);
  res.mean_bias_of_mle_variance = var_hat_stats.mean - res.true_variance;
  res.empirical_sd = std::sqrt(var_hat_stats.variance());
  res.normality_se = se_sum / static_cast<double>(trials);
  res.ratio = res.empirical_sd / res.normality_se;
  res.predicted_ratio = std::sqrt(res.population_kurtosis / 2.0 + nd / (nd - 1.0));
  if (std::fabs(res.population_kurtosis) <= 1e-8) {
    res.sign_matches_kurtosis = res.ratio >= 0.95 && res.ratio <= 1.05;
  } else if (res.population_kurtosis > 0.0) {
    res.sign_matches_kurtosis = res.empirical_sd > res.normality_se;
  } else {
    res.sign_matches_kurtosis = res.empirical_sd < res.normality_se;
  }
  return res;
}

MbbeResult mbbe_optimality_experiment(const GGDParams& dist, std::size_t n_per_trial,
                                      std::size_t trials, std::uint64_t seed) {
  validate_params(dist);
  validate_experiment_args(n_per_trial, trials);

  Rng rng(seed);
  std::vector<double> xs(n_per_trial);

  MbbeResult res;
  res.true_variance = variance(dist);
  res.population_kurtosis = excess_kurtosis(dist.beta);

  double se_plain = 0.0;
  double se_corrected = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (double& x : xs) x = sample_one(dist, rng);
    const double s2 = sample_variance(xs);
    const double corrected = mbbe_variance(xs, res.population_kurtosis);
    se_plain += (s2 - res.true_variance) * (s2 - res.true_variance);
    se_corrected += (corrected - res.true_variance) * (corrected - res.true_variance);
  }
  res.mse_sample_variance = se_plain / static_cast<double>(trials);
  res.mse_mbbe = se_corrected / static_cast<double>(trials);
  res.empirical_re = res.mse_sample_variance / res.mse_mbbe;
  res.formula_re = relative_efficiency(n_per_trial, res.population_kurtosis);
  return res;
}

}  // namespace ggtde
