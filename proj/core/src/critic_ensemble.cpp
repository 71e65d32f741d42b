#include "ggtde/critic_ensemble.hpp"

#include <cmath>
#include <stdexcept>

#include "ggtde/ggd.hpp"
#include "ggtde/rng.hpp"

namespace ggtde {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Parameter block offsets within one critic's flat vector.
struct Layout {
  std::size_t feat, hidden, na, hd;
  std::size_t w1, b1, wv, bv, wh, bh, total;

  explicit Layout(const CriticConfig& cfg)
      : feat(cfg.feature_dim), hidden(cfg.hidden_dim), na(cfg.n_actions), hd(cfg.head_dim()) {
    w1 = 0;
    b1 = w1 + hidden * feat;
    wv = b1 + hidden;
    bv = wv + na * hidden;
    wh = bv + na;
    bh = wh + hd * hidden;
    total = bh + hd;
  }
};

// Clamp bounds for head slot m under the given head kind.
void head_bounds(HeadKind kind, std::size_t m, double& lo, double& hi) {
  switch (kind) {
    case HeadKind::variance_head:
      lo = kSigmaMin;
      hi = kSigmaMax;
      return;
    case HeadKind::beta_head:
      lo = kBetaMin;
      hi = kBetaMax;
      return;
    case HeadKind::alpha_beta_heads:
      if (m == 0) {
        lo = kAlphaMin;
        hi = kAlphaMax;
      } else {
        lo = kBetaMin;
        hi = kBetaMax;
      }
      return;
    case HeadKind::none:
      lo = 0.0;
      hi = 0.0;
      return;
  }
}

}  // namespace

void CriticConfig::validate() const {
  check(n_critics >= 2, "CriticConfig: need at least 2 critics for ensemble variances");
  check(feature_dim >= 1, "CriticConfig: feature_dim must be >= 1");
  check(n_actions >= 1, "CriticConfig: n_actions must be >= 1");
  check(hidden_dim >= 1, "CriticConfig: hidden_dim must be >= 1");
  check(std::isfinite(softplus_epsilon) && softplus_epsilon > 0.0,
        "CriticConfig: softplus_epsilon must be positive");
  check(std::isfinite(init_scale) && init_scale > 0.0,
        "CriticConfig: init_scale must be positive");
}

std::size_t CriticConfig::head_dim() const {
  switch (head_kind) {
    case HeadKind::none: return 0;
    case HeadKind::variance_head: return 1;
    case HeadKind::beta_head: return 1;
    case HeadKind::alpha_beta_heads: return 2;
  }
  return 0;
}

std::size_t CriticConfig::params_per_critic() const { return Layout(*this).total; }

CriticEnsemble::CriticEnsemble(const CriticConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const Layout lay(cfg_);
  params_.resize(cfg_.n_critics);
  for (std::size_t i = 0; i < cfg_.n_critics; ++i) {
    Rng rng(mix_seed(cfg_.seed, i));
    std::vector<double>& theta = params_[i];
    theta.assign(lay.total, 0.0);
    // Weights small-uniform, biases zero; heads then start near
    // softplus(0) + eps, comfortably inside their clamp boxes.
    for (std::size_t k = lay.w1; k < lay.b1; ++k) {
      theta[k] = cfg_.init_scale * (2.0 * rng.uniform() - 1.0);
    }
    for (std::size_t k = lay.wv; k < lay.bv; ++k) {
      theta[k] = cfg_.init_scale * (2.0 * rng.uniform() - 1.0);
    }
    for (std::size_t k = lay.wh; k < lay.bh; ++k) {
      theta[k] = cfg_.init_scale * (2.0 * rng.uniform() - 1.0);
    }
  }
  frozen_ = params_;
}

CriticEnsemble::Activations CriticEnsemble::run_critic(const std::vector<double>& theta,
                                                       std::span<const double> features) const {
  const Layout lay(cfg_);
  if (features.size() != lay.feat) {
    throw std::invalid_argument("CriticEnsemble: feature vector has the wrong length");
  }
  Activations act;
  act.hidden.resize(lay.hidden);
  for (std::size_t j = 0; j < lay.hidden; ++j) {
    double z = theta[lay.b1 + j];
    const double* row = &theta[lay.w1 + j * lay.feat];
    for (std::size_t k = 0; k < lay.feat; ++k) z += row[k] * features[k];
    act.hidden[j] = std::tanh(z);
  }
  act.values.resize(lay.na);
  for (std::size_t a = 0; a < lay.na; ++a) {
    double z = theta[lay.bv + a];
    const double* row = &theta[lay.wv + a * lay.hidden];
    for (std::size_t j = 0; j < lay.hidden; ++j) z += row[j] * act.hidden[j];
    act.values[a] = z;
  }
  act.head_pre.resize(lay.hd);
  for (std::size_t m = 0; m < lay.hd; ++m) {
    double z = theta[lay.bh + m];
    const double* row = &theta[lay.wh + m * lay.hidden];
    for (std::size_t j = 0; j < lay.hidden; ++j) z += row[j] * act.hidden[j];
    act.head_pre[m] = z;
  }
  return act;
}

HeadOutput CriticEnsemble::map_heads(std::span<const double> head_pre) const {
  HeadOutput out;
  for (std::size_t m = 0; m < head_pre.size(); ++m) {
    double lo = 0.0;
    double hi = 0.0;
    head_bounds(cfg_.head_kind, m, lo, hi);
    const double raw = softplus(head_pre[m]) + cfg_.softplus_epsilon;
    const double clamped = std::min(std::max(raw, lo), hi);
    switch (cfg_.head_kind) {
      case HeadKind::variance_head: out.sigma = clamped; break;
      case HeadKind::beta_head: out.beta = clamped; break;
      case HeadKind::alpha_beta_heads:
        (m == 0 ? out.alpha : out.beta) = clamped;
        break;
      case HeadKind::none: break;
    }
  }
  return out;
}

EnsembleForward CriticEnsemble::forward_with(const std::vector<std::vector<double>>& params,
                                             std::span<const double> features) const {
  EnsembleForward out;
  out.values.resize(cfg_.n_critics * cfg_.n_actions);
  out.heads.resize(cfg_.n_critics);
  for (std::size_t i = 0; i < cfg_.n_critics; ++i) {
    const Activations act = run_critic(params[i], features);
    for (std::size_t a = 0; a < cfg_.n_actions; ++a) {
      out.values[i * cfg_.n_actions + a] = act.values[a];
    }
    out.heads[i] = map_heads(act.head_pre);
  }
  return out;
}

EnsembleForward CriticEnsemble::forward(std::span<const double> features) const {
  return forward_with(params_, features);
}

EnsembleForward CriticEnsemble::forward_frozen(std::span<const double> features) const {
  return forward_with(frozen_, features);
}

void CriticEnsemble::refresh_frozen() { frozen_ = params_; }

void CriticEnsemble::accumulate_gradient(std::size_t critic, std::span<const double> features,
                                         std::span<const double> d_values,
                                         std::span<const double> d_heads,
                                         std::vector<double>& grad) const {
  const Layout lay(cfg_);
  const std::vector<double>& theta = params_.at(critic);
  if (d_values.size() != lay.na || d_heads.size() != lay.hd) {
    throw std::invalid_argument("CriticEnsemble: upstream gradient lengths are wrong");
  }
  if (grad.size() != lay.total) grad.assign(lay.total, 0.0);

  const Activations act = run_critic(theta, features);

  // Value layer, and its contribution to the hidden gradient.
  std::vector<double> d_hidden(lay.hidden, 0.0);
  for (std::size_t a = 0; a < lay.na; ++a) {
    const double g = d_values[a];
    if (g == 0.0) continue;
    grad[lay.bv + a] += g;
    double* wrow = &grad[lay.wv + a * lay.hidden];
    const double* theta_row = &theta[lay.wv + a * lay.hidden];
    for (std::size_t j = 0; j < lay.hidden; ++j) {
      wrow[j] += g * act.hidden[j];
      d_hidden[j] += g * theta_row[j];
    }
  }

  // Head layer through the clamp and the softplus.
  for (std::size_t m = 0; m < lay.hd; ++m) {
    double lo = 0.0;
    double hi = 0.0;
    head_bounds(cfg_.head_kind, m, lo, hi);
    const double raw = softplus(act.head_pre[m]) + cfg_.softplus_epsilon;
    const bool interior = raw > lo && raw < hi;
    const double g = interior ? d_heads[m] * sigmoid(act.head_pre[m]) : 0.0;
    if (g == 0.0) continue;
    grad[lay.bh + m] += g;
    double* wrow = &grad[lay.wh + m * lay.hidden];
    const double* theta_row = &theta[lay.wh + m * lay.hidden];
    for (std::size_t j = 0; j < lay.hidden; ++j) {
      wrow[j] += g * act.hidden[j];
      d_hidden[j] += g * theta_row[j];
    }
  }

  // Through the tanh into the first layer.
  for (std::size_t j = 0; j < lay.hidden; ++j) {
    const double g = d_hidden[j] * (1.0 - act.hidden[j] * act.hidden[j]);
    if (g == 0.0) continue;
    grad[lay.b1 + j] += g;
    double* wrow = &grad[lay.w1 + j * lay.feat];
    for (std::size_t k = 0; k < lay.feat; ++k) wrow[k] += g * features[k];
  }
}

void CriticEnsemble::apply_update(std::span<const std::vector<double>> grads, double lr) {
  if (grads.size() != cfg_.n_critics) {
    throw std::invalid_argument("CriticEnsemble: need one gradient vector per critic");
  }
  for (std::size_t i = 0; i < cfg_.n_critics; ++i) {
    if (grads[i].size() != params_[i].size()) {
      throw std::invalid_argument("CriticEnsemble: gradient length mismatch");
    }
    for (std::size_t k = 0; k < params_[i].size(); ++k) {
      params_[i][k] -= lr * grads[i][k];
    }
  }
}

}  // namespace ggtde
