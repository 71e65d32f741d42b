#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ggtde/weighting.hpp"

using namespace ggtde;

namespace {

nlohmann::json load_fixture() {
  std::ifstream in(std::string(GGTDE_FIXTURE_DIR) + "/composite_loss_fixture.json");
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return nlohmann::json::parse(ss.str());
}

TDErrorBatch batch_from(const nlohmann::json& jb) {
  TDErrorBatch b;
  b.deltas = jb.at("deltas").get<std::vector<double>>();
  b.ensemble_error_variance = jb.at("ensemble_error_variance").get<std::vector<double>>();
  b.ensemble_value_variance = jb.at("ensemble_value_variance").get<std::vector<double>>();
  b.betas = jb.at("betas").get<std::vector<double>>();
  b.alphas = jb.at("alphas").get<std::vector<double>>();
  return b;
}

}  // namespace

TEST_CASE("effective_sample_size") {
  CHECK(effective_sample_size(std::vector<double>(8, 0.125)) ==
        doctest::Approx(8.0).epsilon(1e-14));
  CHECK(effective_sample_size(std::vector<double>(8, 3.0)) ==
        doctest::Approx(8.0).epsilon(1e-14));  // scale invariant
  CHECK(effective_sample_size(std::vector<double>{1.0, 0.0, 0.0}) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(effective_sample_size(std::vector<double>{3.0, 1.0}) ==
        doctest::Approx(1.6).epsilon(1e-14));
  CHECK_THROWS_AS(effective_sample_size(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(effective_sample_size(std::vector<double>{0.0, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(effective_sample_size(std::vector<double>{1.0, -0.5}),
                  std::invalid_argument);
}

TEST_CASE("solve_xi meets the floor and the target") {
  // All-zero variances: the floor already gives equal weights -> ESS = n.
  const std::vector<double> zeros(8, 0.0);
  const double xi0 = solve_xi(zeros, 4);
  CHECK(xi0 >= 1e-8);
  CHECK(effective_sample_size(std::vector<double>(8, 1.0 / xi0)) ==
        doctest::Approx(8.0).epsilon(1e-12));

  // A single enormous variance: the naive bracket 10*vmax+1 is far too
  // small, so this exercises the doubling expansion.
  std::vector<double> spiky(16, 0.0);
  spiky[15] = 1e6;
  const double xi1 = solve_xi(spiky, 16);
  std::vector<double> w(16);
  for (std::size_t i = 0; i < 16; ++i) w[i] = 1.0 / (spiky[i] + xi1);
  CHECK(effective_sample_size(w) >= 16.0 - 1e-3);

  CHECK_THROWS_AS(solve_xi(zeros, 9), std::invalid_argument);   // unattainable
  CHECK_THROWS_AS(solve_xi(zeros, 0), std::invalid_argument);
  CHECK_THROWS_AS(solve_xi(std::vector<double>{}, 1), std::invalid_argument);
  CHECK_THROWS_AS(solve_xi(std::vector<double>{-1.0, 2.0}, 1), std::invalid_argument);
}

TEST_CASE("solve_xi ESS contract on random batches") {
  std::mt19937_64 gen(5);
  auto u = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v(64);
    for (double& x : v) x = std::pow(10.0, 6.0 * u() - 3.0);
    const double xi = solve_xi(v, 16);
    CHECK(xi >= 1e-8);
    std::vector<double> w(64);
    for (std::size_t i = 0; i < 64; ++i) w[i] = 1.0 / (v[i] + xi);
    const double ess = effective_sample_size(w);
    CHECK(ess >= 16.0 - 1e-6);
    CHECK(ess <= 64.0 + 1e-9);
  }
}

TEST_CASE("inverse-variance weights downweight uncertain samples") {
  TDErrorBatch b;
  b.deltas = {0.1, 0.2, -0.1, 0.3};
  b.ensemble_value_variance = {1.0, 1.0, 100.0, 1.0};
  b.ensemble_error_variance = {1.0, 1.0, 100.0, 1.0};
  b.betas = {2.0, 2.0, 2.0, 2.0};
  b.alphas = {1.0, 1.0, 1.0, 1.0};

  WeightingConfig cfg;
  cfg.xi.solve = false;
  cfg.xi.fixed_value = 0.01;
  cfg.use_mbbe = false;

  const auto wv = normalize_weights(biv_weights(b, cfg));
  const auto we = normalize_weights(biev_weights(b, cfg));
  CHECK(wv[2] < wv[0] / 50.0);
  CHECK(we[2] < we[0] / 50.0);
  // The three clean samples share the weight equally.
  CHECK(wv[0] == doctest::Approx(wv[1]).epsilon(1e-12));
  CHECK(wv[1] == doctest::Approx(wv[3]).epsilon(1e-12));

  // biv scales the value variance by gamma^2; gamma = 0 makes it inert,
  // so all weights equalize.
  WeightingConfig flat = cfg;
  flat.discount_gamma = 0.0;
  const auto w0 = normalize_weights(biv_weights(b, flat));
  CHECK(w0[2] == doctest::Approx(w0[0]).epsilon(1e-12));

  // The ensemble-size correction divides every variance by the same
  // factor, which shifts weight around a fixed xi.
  WeightingConfig mb = cfg;
  mb.use_mbbe = true;  // kappa 0, n = 5 -> denominator 1.5
  const auto wm = normalize_weights(biev_weights(b, mb));
  CHECK(wm[2] > we[2]);  // shrunk outlier variance -> slightly more weight
}

TEST_CASE("risk weights follow the shape heads") {
  TDErrorBatch b;
  b.deltas = {0.0, 0.0, 0.0};
  b.ensemble_value_variance = {0.0, 0.0, 0.0};
  b.ensemble_error_variance = {0.0, 0.0, 0.0};
  b.betas = {0.5, 1.0, 2.0};
  b.alphas = {1.0, 1.0, 1.0};

  const auto averse = ra_weights(b, RaMode::risk_averse);
  CHECK(averse == std::vector<double>{0.5, 1.0, 2.0});
  const auto seeking = ra_weights(b, RaMode::risk_seeking);
  CHECK(seeking[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(seeking[2] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(ra_weights(b, RaMode::none) == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("normalize_weights") {
  const auto w = normalize_weights({1.0, 3.0});
  CHECK(w[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK_THROWS_AS(normalize_weights({0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(normalize_weights({1.0, -1.0}), std::invalid_argument);
}

TEST_CASE("TDErrorBatch validation") {
  TDErrorBatch b;
  b.deltas = {0.1};
  b.ensemble_value_variance = {0.0};
  b.ensemble_error_variance = {0.0};
  b.betas = {1.0};
  b.alphas = {1.0};
  CHECK_NOTHROW(b.validate());

  TDErrorBatch short_field = b;
  short_field.betas = {};
  CHECK_THROWS_AS(short_field.validate(), std::invalid_argument);

  TDErrorBatch neg_var = b;
  neg_var.ensemble_error_variance = {-0.1};
  CHECK_THROWS_AS(neg_var.validate(), std::invalid_argument);

  TDErrorBatch bad_beta = b;
  bad_beta.betas = {0.0};
  CHECK_THROWS_AS(bad_beta.validate(), std::invalid_argument);

  TDErrorBatch empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("composite loss reproduces the pinned fixture") {
  const nlohmann::json fx = load_fixture();
  const TDErrorBatch b = batch_from(fx.at("batch"));
  const WeightingConfig cfg = WeightingConfig::from_json_text(fx.at("config").dump());
  const nlohmann::json& want = fx.at("expected");

  const CompositeLossResult res = composite_loss(b, cfg, NllForm::exact);
  CHECK(res.attenuation_term ==
        doctest::Approx(want.at("attenuation_term").get<double>()).epsilon(1e-12));
  CHECK(res.regularization_term ==
        doctest::Approx(want.at("regularization_term").get<double>()).epsilon(1e-12));
  CHECK(res.total == doctest::Approx(want.at("total").get<double>()).epsilon(1e-12));

  const auto want_ra = want.at("ra_weights_normalized").get<std::vector<double>>();
  const auto want_reg = want.at("biev_weights_normalized").get<std::vector<double>>();
  REQUIRE(res.ra_weights_norm.size() == want_ra.size());
  for (std::size_t i = 0; i < want_ra.size(); ++i) {
    CHECK(res.ra_weights_norm[i] == doctest::Approx(want_ra[i]).epsilon(1e-12));
    CHECK(res.reg_weights_norm[i] == doctest::Approx(want_reg[i]).epsilon(1e-12));
  }

  // Absolute-error penalty variant of the same fixture.
  WeightingConfig abs_cfg = cfg;
  abs_cfg.reg_loss = RegLoss::absolute;
  const CompositeLossResult abs_res = composite_loss(b, abs_cfg, NllForm::exact);
  CHECK(abs_res.regularization_term ==
        doctest::Approx(want.at("regularization_term_absolute").get<double>()).epsilon(1e-12));
  CHECK(abs_res.total ==
        doctest::Approx(want.at("total_absolute").get<double>()).epsilon(1e-12));
}

TEST_CASE("gaussian baseline reproduces the pinned fixture") {
  const nlohmann::json fx = load_fixture();
  const TDErrorBatch b = batch_from(fx.at("batch"));
  const WeightingConfig cfg = WeightingConfig::from_json_text(fx.at("config").dump());
  const nlohmann::json& base = fx.at("baseline");
  const auto sigmas = base.at("sigma_heads").get<std::vector<double>>();

  const GaussianBaselineResult res = gaussian_baseline_loss(b, sigmas, cfg);
  CHECK(res.nll_term ==
        doctest::Approx(base.at("expected_gaussian_nll").get<double>()).epsilon(1e-12));
  CHECK(res.regularization_term ==
        doctest::Approx(base.at("expected_biv_regularization").get<double>()).epsilon(1e-12));
  CHECK(res.total ==
        doctest::Approx(base.at("expected_total").get<double>()).epsilon(1e-12));

  const auto want_w = base.at("biv_weights_normalized").get<std::vector<double>>();
  const auto got_w = normalize_weights(biv_weights(b, cfg));
  for (std::size_t i = 0; i < want_w.size(); ++i) {
    CHECK(got_w[i] == doctest::Approx(want_w[i]).epsilon(1e-12));
  }
}

TEST_CASE("composite loss properties") {
  const nlohmann::json fx = load_fixture();
  TDErrorBatch b = batch_from(fx.at("batch"));
  WeightingConfig cfg = WeightingConfig::from_json_text(fx.at("config").dump());

  SUBCASE("exact and modified forms agree when every beta is 1") {
    b.betas = {1.0, 1.0, 1.0, 1.0};
    const auto e = composite_loss(b, cfg, NllForm::exact);
    const auto m = composite_loss(b, cfg, NllForm::modified);
    CHECK(e.total == doctest::Approx(m.total).epsilon(1e-14));
  }

  SUBCASE("lambda = 0 removes the penalty from the total") {
    cfg.lambda = 0.0;
    const auto res = composite_loss(b, cfg, NllForm::exact);
    CHECK(res.total == res.attenuation_term);
    CHECK(res.regularization_term > 0.0);  // still reported
  }

  SUBCASE("absolute penalty is 1-homogeneous, squared is 2-homogeneous") {
    const double c = 3.0;
    WeightingConfig abs_cfg = cfg;
    abs_cfg.reg_loss = RegLoss::absolute;
    const double reg_sq = composite_loss(b, cfg, NllForm::exact).regularization_term;
    const double reg_abs = composite_loss(b, abs_cfg, NllForm::exact).regularization_term;
    for (double& d : b.deltas) d *= c;
    CHECK(composite_loss(b, cfg, NllForm::exact).regularization_term ==
          doctest::Approx(c * c * reg_sq).epsilon(1e-12));
    CHECK(composite_loss(b, abs_cfg, NllForm::exact).regularization_term ==
          doctest::Approx(c * reg_abs).epsilon(1e-12));
  }

  SUBCASE("a larger fixed xi flattens the weights") {
    cfg.xi.solve = false;
    cfg.xi.fixed_value = 1e6;
    const auto res = composite_loss(b, cfg, NllForm::exact);
    for (double w : res.reg_weights_norm) {
      CHECK(w == doctest::Approx(0.25).epsilon(1e-5));
    }
  }
}

TEST_CASE("weighting config JSON parsing") {
  SUBCASE("empty object keeps every default") {
    const WeightingConfig cfg = WeightingConfig::from_json_text("{}");
    const WeightingConfig def;
    CHECK(cfg.lambda == def.lambda);
    CHECK(cfg.xi.solve == def.xi.solve);
    CHECK(cfg.xi.min_effective_batch == def.xi.min_effective_batch);
    CHECK(cfg.scheme == def.scheme);
    CHECK(cfg.ra_mode == def.ra_mode);
    CHECK(cfg.use_mbbe == def.use_mbbe);
  }
  SUBCASE("unknown fields are rejected, not ignored") {
    CHECK_THROWS_AS(WeightingConfig::from_json_text(R"({"lamda": 0.2})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(WeightingConfig::from_json_text(R"({"xi": {"mode": "solve", "foo": 1}})"),
                    std::invalid_argument);
  }
  SUBCASE("xi modes are mutually exclusive with their fields") {
    CHECK_THROWS_AS(WeightingConfig::from_json_text(
                        R"({"xi": {"mode": "fixed", "value": 0.1, "min_effective_batch": 4}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        WeightingConfig::from_json_text(R"({"xi": {"mode": "solve", "value": 0.1}})"),
        std::invalid_argument);
    CHECK_THROWS_AS(WeightingConfig::from_json_text(R"({"xi": {"mode": "banana"}})"),
                    std::invalid_argument);
  }
  SUBCASE("bad values are rejected") {
    CHECK_THROWS_AS(WeightingConfig::from_json_text(R"({"lambda": -1.0})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(WeightingConfig::from_json_text(R"({"discount_gamma": 1.5})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(WeightingConfig::from_json_text(R"({"scheme": "maybe"})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(WeightingConfig::from_json_text(R"({"ensemble_size": 1})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(WeightingConfig::from_json_text("[1, 2]"), std::invalid_argument);
    CHECK_THROWS_AS(WeightingConfig::from_json_text("{"), std::invalid_argument);
  }
  SUBCASE("serialization round-trips") {
    WeightingConfig cfg;
    cfg.lambda = 0.7;
    cfg.scheme = WeightScheme::biv;
    cfg.ra_mode = RaMode::risk_seeking;
    cfg.reg_loss = RegLoss::absolute;
    cfg.xi.solve = false;
    cfg.xi.fixed_value = 0.25;
    cfg.use_mbbe = false;
    cfg.ensemble_size = 7;
    cfg.mbbe_kappa = 1.5;
    const WeightingConfig back = WeightingConfig::from_json_text(cfg.to_json_text());
    CHECK(back.to_json_text() == cfg.to_json_text());
    CHECK(back.lambda == cfg.lambda);
    CHECK(back.scheme == cfg.scheme);
    CHECK(back.ra_mode == cfg.ra_mode);
    CHECK(back.reg_loss == cfg.reg_loss);
    CHECK(back.xi.fixed_value == cfg.xi.fixed_value);
    CHECK(back.ensemble_size == cfg.ensemble_size);
  }
}
