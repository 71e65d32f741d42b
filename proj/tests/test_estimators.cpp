#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ggtde/estimators.hpp"
#include "ggtde/ggd.hpp"

using namespace ggtde;

TEST_CASE("sample_variance is the Bessel-corrected estimator") {
  const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
  CHECK(sample_variance(xs) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(sample_variance(std::vector<double>{2.5, 2.5, 2.5}) == 0.0);
  CHECK_THROWS_AS(sample_variance(std::vector<double>{1.0}), std::domain_error);
}

TEST_CASE("sample_excess_kurtosis on hand-checkable inputs") {
  // A two-point symmetric sample is the minimum-kurtosis distribution.
  const std::vector<double> pm = {1.0, -1.0, 1.0, -1.0, 1.0, -1.0};
  CHECK(sample_excess_kurtosis(pm) == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK_THROWS_AS(sample_excess_kurtosis(std::vector<double>{1.0, 2.0, 3.0}),
                  std::domain_error);
  CHECK_THROWS_AS(sample_excess_kurtosis(std::vector<double>{3.0, 3.0, 3.0, 3.0}),
                  std::domain_error);
}

TEST_CASE("mbbe_variance with a supplied kurtosis") {
  const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0, 5.0};  // s^2 = 2.5
  // kappa = 0, n = 5: denominator = 0/5 + 6/4 = 1.5.
  CHECK(mbbe_variance(xs, 0.0) == doctest::Approx(2.5 / 1.5).epsilon(1e-15));
  // kappa = 2: denominator = 2/5 + 1.5 = 1.9.
  CHECK(mbbe_variance(xs, 2.0) == doctest::Approx(2.5 / 1.9).epsilon(1e-15));
  // The corrected estimate never exceeds the sample variance for kappa >= 0
  // (the denominator is then >= (n+1)/(n-1) > 1).
  CHECK(mbbe_variance(xs, 0.0) < sample_variance(xs));
  // A kappa below -2 is impossible and must be rejected, not floored.
  CHECK_THROWS_AS(mbbe_variance(xs, -8.0), std::domain_error);
}

TEST_CASE("mbbe_variance with plug-in kurtosis") {
  const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0, 5.0};
  // Plug-in excess kurtosis: m2 = 2, m4 = 6.8, m4/m2^2 - 3 = -1.3,
  // shrunk by 5/15 to -0.43333...; denominator = -0.086666... + 1.5.
  const double expect = 2.5 / (-1.3 * (5.0 / 15.0) / 5.0 + 1.5);
  CHECK(mbbe_variance(xs, std::nan("")) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(mbbe_variance(xs, std::nan("")) == doctest::Approx(1.7688679245283019).epsilon(1e-13));
  // Zero-variance samples shrink to zero without a kurtosis.
  CHECK(mbbe_variance(std::vector<double>{4.0, 4.0, 4.0, 4.0}, std::nan("")) == 0.0);
}

TEST_CASE("relative_efficiency closed form") {
  CHECK(relative_efficiency(10, 3.0) == doctest::Approx(1.0 + 0.3 + 2.0 / 9.0).epsilon(1e-15));
  CHECK(relative_efficiency(10, 0.0) == doctest::Approx(1.0 + 2.0 / 9.0).epsilon(1e-15));
  // Gains vanish as n grows.
  CHECK(relative_efficiency(100000, 3.0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_THROWS_AS(relative_efficiency(1, 0.0), std::domain_error);
  CHECK_THROWS_AS(relative_efficiency(10, -2.5), std::domain_error);
  CHECK_THROWS_AS(relative_efficiency(10, std::nan("")), std::domain_error);
}

TEST_CASE("coefficient_of_variation") {
  const std::vector<double> xs = {2.0, 4.0};
  CHECK(coefficient_of_variation(xs) ==
        doctest::Approx(std::sqrt(2.0) / 3.0).epsilon(1e-14));
  // Sign of the mean does not matter.
  const std::vector<double> neg = {-2.0, -4.0};
  CHECK(coefficient_of_variation(neg) ==
        doctest::Approx(std::sqrt(2.0) / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(coefficient_of_variation(std::vector<double>{-1.0, 1.0}),
                  std::domain_error);
}

TEST_CASE("EstimatorReport round-trips through JSON exactly") {
  const std::vector<double> xs = {0.3, -1.2, 2.2, 0.9, -0.4, 1.7, 0.05, -2.6};
  const EstimatorReport r = make_report(xs);
  CHECK(r.n == 8);
  CHECK(r.sample_variance == doctest::Approx(sample_variance(xs)).epsilon(1e-15));
  const EstimatorReport back = EstimatorReport::from_json(r.to_json());
  CHECK(back == r);  // bitwise field equality
  CHECK_THROWS_AS(make_report(std::vector<double>{1.0, 2.0, 3.0}), std::domain_error);
  CHECK_THROWS_AS(EstimatorReport::from_json("{\"n\": 4}"), std::invalid_argument);
  CHECK_THROWS_AS(EstimatorReport::from_json("not json"), std::invalid_argument);
}

TEST_CASE("variance-spread experiment: heavy and light tails move the SD "
          "in opposite directions") {
  // Laplace noise (excess kurtosis 3): the normality-based SE understates
  // the real spread of the variance estimate.
  const Prop1Result heavy = prop1_bias_experiment({0.0, 1.0, 1.0}, 50, 2000, 31);
  CHECK(heavy.population_kurtosis == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(heavy.empirical_sd > heavy.normality_se);
  CHECK(heavy.sign_matches_kurtosis);
  CHECK(heavy.ratio == doctest::Approx(heavy.predicted_ratio).epsilon(0.10));

  // Near-uniform noise (negative excess kurtosis): overstatement.
  const Prop1Result light = prop1_bias_experiment({0.0, 1.0, 8.0}, 50, 2000, 32);
  CHECK(light.population_kurtosis < 0.0);
  CHECK(light.empirical_sd < light.normality_se);
  CHECK(light.sign_matches_kurtosis);

  // The ML variance estimate is biased low by roughly sigma^2 / n.
  CHECK(heavy.mean_bias_of_mle_variance < 0.0);
  CHECK(heavy.true_variance == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("corrected-estimator experiment beats the sample variance in MSE") {
  const MbbeResult res = mbbe_optimality_experiment({0.0, 1.0, 2.0}, 10, 20000, 7);
  CHECK(res.mse_mbbe <= res.mse_sample_variance);
  CHECK(res.formula_re == doctest::Approx(relative_efficiency(10, 0.0)).epsilon(1e-12));
  CHECK(res.empirical_re == doctest::Approx(res.formula_re).epsilon(0.08));
  CHECK(res.true_variance == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("experiments reject undersized designs") {
  CHECK_THROWS_AS(prop1_bias_experiment({0.0, 1.0, 2.0}, 3, 1000, 1), std::domain_error);
  CHECK_THROWS_AS(prop1_bias_experiment({0.0, 1.0, 2.0}, 10, 50, 1), std::domain_error);
  CHECK_THROWS_AS(mbbe_optimality_experiment({0.0, 1.0, 2.0}, 10, 99, 1), std::domain_error);
  CHECK_THROWS_AS(mbbe_optimality_experiment({0.0, -1.0, 2.0}, 10, 1000, 1),
                  std::domain_error);
}

TEST_CASE("experiments are deterministic in the seed") {
  const MbbeResult a = mbbe_optimality_experiment({0.0, 1.0, 1.0}, 8, 500, 99);
  const MbbeResult b = mbbe_optimality_experiment({0.0, 1.0, 1.0}, 8, 500, 99);
  CHECK(a.mse_sample_variance == b.mse_sample_variance);
  CHECK(a.mse_mbbe == b.mse_mbbe);
  const MbbeResult c = mbbe_optimality_experiment({0.0, 1.0, 1.0}, 8, 500, 100);
  CHECK(a.mse_sample_variance != c.mse_sample_variance);
}
