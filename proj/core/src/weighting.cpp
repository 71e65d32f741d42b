#include "ggtde/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ggtde {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// The MBBE denominator for an ensemble of n values with excess kurtosis
// kappa; positive for every kappa >= -2.
double mbbe_denominator(std::size_t n, double kappa) {
  const double nd = static_cast<double>(n);
  return kappa / nd + (nd + 1.0) / (nd - 1.0);
}

double resolve_xi(std::span<const double> variances, const WeightingConfig& cfg) {
  if (cfg.xi.solve) return solve_xi(variances, cfg.xi.min_effective_batch);
  return cfg.xi.fixed_value;
}

}  // namespace

void WeightingConfig::validate() const {
  require(std::isfinite(lambda) && lambda >= 0.0, "WeightingConfig: lambda must be >= 0");
  require(std::isfinite(discount_gamma) && discount_gamma >= 0.0 && discount_gamma <= 1.0,
          "WeightingConfig: discount_gamma must be in [0, 1]");
  require(ensemble_size >= 2, "WeightingConfig: ensemble_size must be >= 2");
  require(std::isfinite(mbbe_kappa) && mbbe_denominator(ensemble_size, mbbe_kappa) > 0.0,
          "WeightingConfig: mbbe_kappa drives the correction denominator to <= 0");
  if (xi.solve) {
    require(xi.min_effective_batch >= 1, "WeightingConfig: min_effective_batch must be >= 1");
  } else {
    require(std::isfinite(xi.fixed_value) && xi.fixed_value >= 0.0,
            "WeightingConfig: fixed xi must be >= 0");
  }
}

namespace {

const char* scheme_name(WeightScheme s) { return s == WeightScheme::biv ? "biv" : "biev"; }
const char* ra_name(RaMode m) {
  switch (m) {
    case RaMode::none: return "none";
    case RaMode::risk_averse: return "risk_averse";
    case RaMode::risk_seeking: return "risk_seeking";
  }
  return "none";
}
const char* reg_name(RegLoss r) { return r == RegLoss::squared ? "squared" : "absolute"; }

template <typename Enum>
Enum parse_enum(const std::string& v, std::initializer_list<std::pair<const char*, Enum>> table,
                const char* field) {
  for (const auto& [name, value] : table) {
    if (v == name) return value;
  }
  throw std::invalid_argument(std::string("WeightingConfig: bad value '") + v + "' for " + field);
}

void reject_unknown_keys(const nlohmann::json& j,
                         std::initializer_list<const char*> known, const char* where) {
  for (const auto& item : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) {
          return item.key() == k;
        }) == known.end()) {
      throw std::invalid_argument(std::string("WeightingConfig: unknown field '") + item.key() +
                                  "' in " + where);
    }
  }
}

}  // namespace

WeightingConfig WeightingConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("WeightingConfig: invalid JSON: ") + e.what());
  }
  require(j.is_object(), "WeightingConfig: document must be a JSON object");
  reject_unknown_keys(j,
                      {"lambda", "xi", "discount_gamma", "scheme", "ra_mode", "reg_loss",
                       "use_mbbe", "ensemble_size", "mbbe_kappa"},
                      "config");

  WeightingConfig cfg;
  try {
    if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
    if (j.contains("discount_gamma")) cfg.discount_gamma = j["discount_gamma"].get<double>();
    if (j.contains("scheme")) {
      cfg.scheme = parse_enum<WeightScheme>(
          j["scheme"].get<std::string>(),
          {{"biv", WeightScheme::biv}, {"biev", WeightScheme::biev}}, "scheme");
    }
    if (j.contains("ra_mode")) {
      cfg.ra_mode = parse_enum<RaMode>(j["ra_mode"].get<std::string>(),
                                       {{"none", RaMode::none},
                                        {"risk_averse", RaMode::risk_averse},
                                        {"risk_seeking", RaMode::risk_seeking}},
                                       "ra_mode");
    }
    if (j.contains("reg_loss")) {
      cfg.reg_loss = parse_enum<RegLoss>(
          j["reg_loss"].get<std::string>(),
          {{"squared", RegLoss::squared}, {"absolute", RegLoss::absolute}}, "reg_loss");
    }
    if (j.contains("use_mbbe")) cfg.use_mbbe = j["use_mbbe"].get<bool>();
    if (j.contains("ensemble_size")) cfg.ensemble_size = j["ensemble_size"].get<std::size_t>();
    if (j.contains("mbbe_kappa")) cfg.mbbe_kappa = j["mbbe_kappa"].get<double>();
    if (j.contains("xi")) {
      const nlohmann::json& jx = j["xi"];
      require(jx.is_object(), "WeightingConfig: xi must be an object");
      reject_unknown_keys(jx, {"mode", "value", "min_effective_batch"}, "xi");
      const std::string mode = jx.at("mode").get<std::string>();
      if (mode == "fixed") {
        cfg.xi.solve = false;
        cfg.xi.fixed_value = jx.at("value").get<double>();
        require(!jx.contains("min_effective_batch"),
                "WeightingConfig: min_effective_batch is only valid with xi mode 'solve'");
      } else if (mode == "solve") {
        cfg.xi.solve = true;
        if (jx.contains("min_effective_batch")) {
          cfg.xi.min_effective_batch = jx["min_effective_batch"].get<std::size_t>();
        }
        require(!jx.contains("value"), "WeightingConfig: value is only valid with xi mode 'fixed'");
      } else {
        throw std::invalid_argument("WeightingConfig: xi mode must be 'fixed' or 'solve'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("WeightingConfig: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string WeightingConfig::to_json_text() const {
  nlohmann::json jx;
  if (xi.solve) {
    jx = {{"mode", "solve"}, {"min_effective_batch", xi.min_effective_batch}};
  } else {
    jx = {{"mode", "fixed"}, {"value", xi.fixed_value}};
  }
  const nlohmann::json j{{"lambda", lambda},
                         {"xi", jx},
                         {"discount_gamma", discount_gamma},
                         {"scheme", scheme_name(scheme)},
                         {"ra_mode", ra_name(ra_mode)},
                         {"reg_loss", reg_name(reg_loss)},
                         {"use_mbbe", use_mbbe},
                         {"ensemble_size", ensemble_size},
                         {"mbbe_kappa", mbbe_kappa}};
  return j.dump(2);
}

void TDErrorBatch::validate() const {
  const std::size_t n = deltas.size();
  require(n >= 1, "TDErrorBatch: batch must be non-empty");
  require(ensemble_value_variance.size() == n && ensemble_error_variance.size() == n &&
              betas.size() == n && alphas.size() == n,
          "TDErrorBatch: all fields must share the batch length");
  for (std::size_t i = 0; i < n; ++i) {
    require(std::isfinite(deltas[i]), "TDErrorBatch: deltas must be finite");
    require(std::isfinite(ensemble_value_variance[i]) && ensemble_value_variance[i] >= 0.0,
            "TDErrorBatch: value variances must be finite and >= 0");
    require(std::isfinite(ensemble_error_variance[i]) && ensemble_error_variance[i] >= 0.0,
            "TDErrorBatch: error variances must be finite and >= 0");
    require(std::isfinite(betas[i]) && betas[i] > 0.0, "TDErrorBatch: betas must be positive");
    require(std::isfinite(alphas[i]) && alphas[i] > 0.0, "TDErrorBatch: alphas must be positive");
  }
}

double effective_sample_size(std::span<const double> weights) {
  require(!weights.empty(), "effective_sample_size: empty weight vector");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, "effective_sample_size: weights must be >= 0");
    sum += w;
    sum_sq += w * w;
  }
  require(sum_sq > 0.0, "effective_sample_size: all weights are zero");
  return sum * sum / sum_sq;
}

double solve_xi(std::span<const double> raw_variances, std::size_t min_effective_batch) {
  const std::size_t n = raw_variances.size();
  require(n >= 1, "solve_xi: empty variance vector");
  require(min_effective_batch >= 1, "solve_xi: min_effective_batch must be >= 1");
  require(min_effective_batch <= n,
          "solve_xi: min_effective_batch exceeds the batch size; unattainable");
  double vmax = 0.0;
  for (double v : raw_variances) {
    require(std::isfinite(v) && v >= 0.0, "solve_xi: variances must be finite and >= 0");
    vmax = std::max(vmax, v);
  }

  const double target = static_cast<double>(min_effective_batch);
  const auto ess_at = [&](double xi) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double v : raw_variances) {
      const double w = 1.0 / (v + xi);
      sum += w;
      sum_sq += w * w;
    }
    return sum * sum / sum_sq;
  };

  constexpr double kXiFloor = 1e-8;
  double lo = kXiFloor;
  if (ess_at(lo) >= target) return lo;

  // The ESS rises monotonically toward n as xi grows, but the xi needed
  // can exceed any fixed multiple of the variances by orders of magnitude
  // when a handful of samples dominate, so grow the bracket until it
  // provably contains the target.  In floating point the ESS saturates at
  // exactly n once xi swamps every variance, so the loop terminates even
  // for a target of n.
  double hi = 10.0 * vmax + 1.0;
  while (ess_at(hi) < target) {
    hi *= 2.0;
    require(std::isfinite(hi), "solve_xi: bracket expansion overflowed");
  }

  // Bisect, keeping the invariant ess_at(hi) >= target.
  for (int i = 0; i < 200 && (hi - lo) > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (ess_at(mid) >= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

std::vector<double> biv_weights(const TDErrorBatch& batch, const WeightingConfig& cfg) {
  batch.validate();
  cfg.validate();
  const double g2 = cfg.discount_gamma * cfg.discount_gamma;
  std::vector<double> scaled(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    scaled[i] = g2 * batch.ensemble_value_variance[i];
  }
  const double xi = resolve_xi(scaled, cfg);
  std::vector<double> w(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) w[i] = 1.0 / (scaled[i] + xi);
  return w;
}

std::vector<double> biev_weights(const TDErrorBatch& batch, const WeightingConfig& cfg) {
  batch.validate();
  cfg.validate();
  std::vector<double> corrected(batch.size());
  const double denom =
      cfg.use_mbbe ? mbbe_denominator(cfg.ensemble_size, cfg.mbbe_kappa) : 1.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    corrected[i] = batch.ensemble_error_variance[i] / denom;
  }
  const double xi = resolve_xi(corrected, cfg);
  std::vector<double> w(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) w[i] = 1.0 / (corrected[i] + xi);
  return w;
}

std::vector<double> ra_weights(const TDErrorBatch& batch, RaMode mode) {
  batch.validate();
  std::vector<double> w(batch.size(), 1.0);
  if (mode == RaMode::none) return w;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    w[i] = mode == RaMode::risk_averse ? batch.betas[i] : 1.0 / batch.betas[i];
  }
  return w;
}

std::vector<double> normalize_weights(std::vector<double> w) {
  double sum = 0.0;
  for (double x : w) {
    require(std::isfinite(x) && x >= 0.0, "normalize_weights: weights must be >= 0");
    sum += x;
  }
  require(sum > 0.0, "normalize_weights: weight sum must be positive");
  for (double& x : w) x /= sum;
  return w;
}

CompositeLossResult composite_loss(const TDErrorBatch& batch, const WeightingConfig& cfg,
                                   NllForm form) {
  batch.validate();
  cfg.validate();

  CompositeLossResult res;
  res.ra_weights_norm = normalize_weights(ra_weights(batch, cfg.ra_mode));
  res.reg_weights_norm = normalize_weights(
      cfg.scheme == WeightScheme::biev ? biev_weights(batch, cfg) : biv_weights(batch, cfg));

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const GGDParams p{0.0, batch.alphas[i], batch.betas[i]};
    res.attenuation_term += res.ra_weights_norm[i] * nll_value(batch.deltas[i], p, form);
    const double rho = cfg.reg_loss == RegLoss::squared
                           ? batch.deltas[i] * batch.deltas[i]
                           : std::fabs(batch.deltas[i]);
    res.regularization_term += res.reg_weights_norm[i] * rho;
  }
  res.total = res.attenuation_term + cfg.lambda * res.regularization_term;
  return res;
}

GaussianBaselineResult gaussian_baseline_loss(const TDErrorBatch& batch,
                                              std::span<const double> sigma_heads,
                                              const WeightingConfig& cfg) {
  batch.validate();
  cfg.validate();
  require(sigma_heads.size() == batch.size(),
          "gaussian_baseline_loss: sigma_heads must match the batch length");
  for (double s : sigma_heads) {
    require(std::isfinite(s) && s > 0.0, "gaussian_baseline_loss: sigmas must be positive");
  }

  GaussianBaselineResult res;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double z = batch.deltas[i] / sigma_heads[i];
    res.nll_term += z * z + 2.0 * std::log(sigma_heads[i]);
  }
  const std::vector<double> w = normalize_weights(biv_weights(batch, cfg));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    res.regularization_term += w[i] * batch.deltas[i] * batch.deltas[i];
  }
  res.total = res.nll_term + cfg.lambda * res.regularization_term;
  return res;
}

}  // namespace ggtde
