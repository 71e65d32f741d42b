#include "ggtde/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ggtde/estimators.hpp"

namespace ggtde {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool uses_reg_weights(LossKind kind) {
  return kind == LossKind::gaussian_nll_biv || kind == LossKind::ggd_nll_biev;
}

bool is_ggd_loss(LossKind kind) {
  return kind == LossKind::ggd_nll_biev || kind == LossKind::ggd_nll_only;
}

void one_hot(std::size_t s, std::vector<double>& f) {
  std::fill(f.begin(), f.end(), 0.0);
  f.at(s) = 1.0;
}

double mean_of(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double bessel_variance(std::span<const double> xs) {
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

HeadKind default_head_kind(LossKind kind) {
  switch (kind) {
    case LossKind::mse: return HeadKind::none;
    case LossKind::gaussian_nll_biv: return HeadKind::variance_head;
    case LossKind::ggd_nll_biev: return HeadKind::beta_head;
    case LossKind::ggd_nll_only: return HeadKind::beta_head;
  }
  return HeadKind::none;
}

void TrainConfig::validate() const {
  check(std::isfinite(lr) && lr > 0.0, "TrainConfig: lr must be positive");
  check(std::isfinite(epsilon) && epsilon >= 0.0 && epsilon <= 1.0,
        "TrainConfig: epsilon must be in [0, 1]");
  check(batch_size >= 2, "TrainConfig: batch_size must be >= 2");
  check(replay_capacity >= batch_size, "TrainConfig: replay_capacity must cover one batch");
  check(target_refresh >= 1, "TrainConfig: target_refresh must be >= 1");
  check(n_critics >= 2, "TrainConfig: need at least 2 critics");
  check(hidden_dim >= 1, "TrainConfig: hidden_dim must be >= 1");
  weighting.validate();

  switch (loss_kind) {
    case LossKind::mse:
      check(head_kind == HeadKind::none, "TrainConfig: mse expects head_kind 'none'");
      break;
    case LossKind::gaussian_nll_biv:
      check(head_kind == HeadKind::variance_head,
            "TrainConfig: gaussian_nll_biv expects head_kind 'variance_head'");
      break;
    case LossKind::ggd_nll_biev:
    case LossKind::ggd_nll_only:
      check(head_kind == HeadKind::beta_head || head_kind == HeadKind::alpha_beta_heads,
            "TrainConfig: shape losses expect a beta head");
      break;
  }
  if (uses_reg_weights(loss_kind) && weighting.xi.solve) {
    check(weighting.xi.min_effective_batch <= batch_size,
          "TrainConfig: min_effective_batch cannot exceed batch_size");
  }
}

namespace {

// Pass 1 of the loss: per-critic TD errors, bootstrap values, and head
// outputs for one batch, plus the scalar diagnostics the weights are
// built from.
struct BatchTensors {
  std::vector<std::vector<double>> deltas;     // [t][critic]
  std::vector<std::vector<HeadOutput>> heads;  // [t][critic], at state s_t
  TDErrorBatch diag;
};

BatchTensors compute_batch_tensors(const CriticEnsemble& ens, std::span<const Transition> batch,
                                   const TrainConfig& cfg, double discount) {
  const CriticConfig& ccfg = ens.config();
  const std::size_t K = ccfg.n_critics;
  const std::size_t na = ccfg.n_actions;
  const std::size_t B = batch.size();
  check(B >= 2, "train: batch must hold at least 2 transitions");

  BatchTensors out;
  out.deltas.assign(B, std::vector<double>(K));
  out.heads.resize(B);
  out.diag.deltas.resize(B);
  out.diag.ensemble_value_variance.resize(B);
  out.diag.ensemble_error_variance.resize(B);
  out.diag.betas.resize(B);
  out.diag.alphas.resize(B);

  std::vector<double> feat(ccfg.feature_dim);
  std::vector<double> boot(K);
  for (std::size_t t = 0; t < B; ++t) {
    const Transition& tr = batch[t];
    check(tr.state < ccfg.feature_dim && tr.next_state < ccfg.feature_dim,
          "train: transition state out of range");
    check(tr.action < na && tr.next_action < na, "train: transition action out of range");

    one_hot(tr.state, feat);
    const EnsembleForward cur = ens.forward(feat);
    one_hot(tr.next_state, feat);
    const EnsembleForward frz = ens.forward_frozen(feat);

    std::size_t boot_action = tr.next_action;
    if (cfg.policy == PolicyKind::eps_greedy) {
      // Q-learning style: bootstrap from the frozen ensemble-mean argmax.
      double best = -1e300;
      for (std::size_t a = 0; a < na; ++a) {
        double m = 0.0;
        for (std::size_t i = 0; i < K; ++i) m += frz.value(i, a, na);
        m /= static_cast<double>(K);
        if (m > best) {
          best = m;
          boot_action = a;
        }
      }
    }

    for (std::size_t i = 0; i < K; ++i) {
      boot[i] = frz.value(i, boot_action, na);
      // Time-limit truncation still bootstraps; the chain has no terminal
      // states, so the target is unconditional.
      const double target = tr.reward + discount * boot[i];
      out.deltas[t][i] = target - cur.value(i, tr.action, na);
    }
    out.heads[t] = cur.heads;

    out.diag.deltas[t] = mean_of(out.deltas[t]);
    out.diag.ensemble_error_variance[t] = bessel_variance(out.deltas[t]);
    out.diag.ensemble_value_variance[t] = bessel_variance(boot);

    double beta_mean = 0.0;
    for (const HeadOutput& h : cur.heads) beta_mean += h.beta;
    beta_mean /= static_cast<double>(K);
    double alpha_mean = 1.0;
    if (ccfg.head_kind == HeadKind::alpha_beta_heads) {
      alpha_mean = 0.0;
      for (const HeadOutput& h : cur.heads) alpha_mean += h.alpha;
      alpha_mean /= static_cast<double>(K);
    } else if (ccfg.head_kind == HeadKind::variance_head) {
      // Gaussian sigma in GGD scale units, for the diagnostics record.
      double sigma_mean = 0.0;
      for (const HeadOutput& h : cur.heads) sigma_mean += h.sigma;
      alpha_mean = sigma_mean / static_cast<double>(K) * std::sqrt(2.0);
    }
    out.diag.betas[t] = beta_mean;
    out.diag.alphas[t] = alpha_mean;
  }
  return out;
}

bool diagnostics_finite(const TDErrorBatch& diag) {
  for (std::size_t t = 0; t < diag.size(); ++t) {
    if (!std::isfinite(diag.deltas[t]) || !std::isfinite(diag.ensemble_error_variance[t]) ||
        !std::isfinite(diag.ensemble_value_variance[t]) || !std::isfinite(diag.betas[t]) ||
        !std::isfinite(diag.alphas[t])) {
      return false;
    }
  }
  return true;
}

// Excess kurtosis of the pooled, per-sample-centered critic deviations,
// shrunk toward zero and clamped to the representable range.
double pooled_kappa(const BatchTensors& bt) {
  std::vector<double> pooled;
  pooled.reserve(bt.deltas.size() * bt.deltas.front().size());
  for (std::size_t t = 0; t < bt.deltas.size(); ++t) {
    for (double d : bt.deltas[t]) pooled.push_back(d - bt.diag.deltas[t]);
  }
  double ss = 0.0;
  for (double d : pooled) ss += d * d;
  if (ss == 0.0 || pooled.size() < 4) return 0.0;
  const double n = static_cast<double>(pooled.size());
  const double k = sample_excess_kurtosis(pooled) * n / (n + 10.0);
  return std::clamp(k, -1.9, 50.0);
}

struct EvalResult {
  LossBreakdown loss;
  std::vector<std::vector<double>> grads;
};

EvalResult evaluate_impl(const CriticEnsemble& ens, std::span<const Transition> batch,
                         const TrainConfig& cfg, double discount, bool want_grads,
                         std::span<const double> pinned_ra = {},
                         std::span<const double> pinned_reg = {}) {
  cfg.validate();
  const CriticConfig& ccfg = ens.config();
  const std::size_t K = ccfg.n_critics;
  const std::size_t B = batch.size();
  const double invK = 1.0 / static_cast<double>(K);
  const double invB = 1.0 / static_cast<double>(B);

  BatchTensors bt = compute_batch_tensors(ens, batch, cfg, discount);

  EvalResult res;
  res.loss.diagnostics = bt.diag;
  if (!diagnostics_finite(bt.diag)) {
    res.loss.total = std::numeric_limits<double>::quiet_NaN();
    res.loss.diverged = "td_errors";
    return res;
  }

  WeightingConfig wcfg = cfg.weighting;
  if (cfg.estimate_kappa) wcfg.mbbe_kappa = pooled_kappa(bt);

  std::vector<double> ra_w;    // normalized risk weights (shape losses)
  std::vector<double> reg_w;   // normalized inverse-variance weights
  if (is_ggd_loss(cfg.loss_kind)) {
    ra_w = pinned_ra.empty() ? normalize_weights(ra_weights(bt.diag, wcfg.ra_mode))
                             : std::vector<double>(pinned_ra.begin(), pinned_ra.end());
    if (ra_w.size() != B) throw std::invalid_argument("risk weight vector length != batch");
  }
  if (uses_reg_weights(cfg.loss_kind)) {
    reg_w = pinned_reg.empty()
                ? normalize_weights(cfg.loss_kind == LossKind::gaussian_nll_biv ||
                                            wcfg.scheme == WeightScheme::biv
                                        ? biv_weights(bt.diag, wcfg)
                                        : biev_weights(bt.diag, wcfg))
                : std::vector<double>(pinned_reg.begin(), pinned_reg.end());
    if (reg_w.size() != B) throw std::invalid_argument("reg weight vector length != batch");
  }

  if (want_grads) {
    res.grads.assign(K, std::vector<double>(ccfg.params_per_critic(), 0.0));
  }

  std::vector<double> feat(ccfg.feature_dim);
  std::vector<double> d_values(ccfg.n_actions);
  std::vector<double> d_heads(ccfg.head_dim());

  double atten = 0.0;
  double reg = 0.0;
  const bool squared = wcfg.reg_loss == RegLoss::squared;

  for (std::size_t t = 0; t < B; ++t) {
    const Transition& tr = batch[t];
    const double mean_delta = bt.diag.deltas[t];

    double d_reg_d_meandelta = 0.0;
    if (uses_reg_weights(cfg.loss_kind)) {
      if (cfg.loss_kind == LossKind::gaussian_nll_biv || squared) {
        reg += reg_w[t] * mean_delta * mean_delta;
        d_reg_d_meandelta = reg_w[t] * 2.0 * mean_delta;
      } else {
        reg += reg_w[t] * std::fabs(mean_delta);
        d_reg_d_meandelta = reg_w[t] * (mean_delta > 0.0 ? 1.0 : (mean_delta < 0.0 ? -1.0 : 0.0));
      }
    }

    if (want_grads) one_hot(tr.state, feat);

    for (std::size_t i = 0; i < K; ++i) {
      const double delta = bt.deltas[t][i];
      const HeadOutput& head = bt.heads[t][i];
      double d_q = 0.0;  // dL/dQ_i(s_t, a_t)
      std::fill(d_heads.begin(), d_heads.end(), 0.0);

      switch (cfg.loss_kind) {
        case LossKind::mse: {
          atten += invB * invK * delta * delta;
          d_q = invB * invK * 2.0 * delta * -1.0;
          break;
        }
        case LossKind::gaussian_nll_biv: {
          const double z = delta / head.sigma;
          atten += invB * invK * (z * z + 2.0 * std::log(head.sigma));
          d_q = invB * invK * 2.0 * delta / (head.sigma * head.sigma) * -1.0;
          d_q += wcfg.lambda * d_reg_d_meandelta * -invK;
          d_heads[0] = invB * invK *
                       (-2.0 * delta * delta / (head.sigma * head.sigma * head.sigma) +
                        2.0 / head.sigma);
          break;
        }
        case LossKind::ggd_nll_biev:
        case LossKind::ggd_nll_only: {
          const GGDParams p{0.0, head.alpha, head.beta};
          atten += ra_w[t] * invK * nll_value(delta, p, cfg.nll_form);
          if (want_grads) {
            const NllGrad g = nll_grad(delta, p, cfg.nll_form);
            d_q = ra_w[t] * invK * g.d_delta * -1.0;
            if (cfg.loss_kind == LossKind::ggd_nll_biev) {
              d_q += wcfg.lambda * d_reg_d_meandelta * -invK;
            }
            if (ccfg.head_kind == HeadKind::alpha_beta_heads) {
              d_heads[0] = ra_w[t] * invK * g.d_alpha;
              d_heads[1] = ra_w[t] * invK * g.d_beta;
            } else {
              d_heads[0] = ra_w[t] * invK * g.d_beta;
            }
          }
          break;
        }
      }

      if (want_grads) {
        std::fill(d_values.begin(), d_values.end(), 0.0);
        d_values[tr.action] = d_q;
        ens.accumulate_gradient(i, feat, d_values, d_heads, res.grads[i]);
      }
    }
  }

  res.loss.attenuation = atten;
  res.loss.regularization = reg;
  res.loss.total =
      uses_reg_weights(cfg.loss_kind) ? atten + wcfg.lambda * reg : atten;

  if (!std::isfinite(res.loss.attenuation)) {
    res.loss.diverged = is_ggd_loss(cfg.loss_kind)
                            ? "attenuation"
                            : (cfg.loss_kind == LossKind::mse ? "mse" : "gaussian_nll");
  } else if (!std::isfinite(res.loss.regularization)) {
    res.loss.diverged = "regularization";
  } else if (!std::isfinite(res.loss.total)) {
    res.loss.diverged = "total";
  }
  return res;
}

}  // namespace

LossBreakdown evaluate_loss(const CriticEnsemble& ens, std::span<const Transition> batch,
                            const TrainConfig& cfg, double discount) {
  return evaluate_impl(ens, batch, cfg, discount, /*want_grads=*/false).loss;
}

LossBreakdown evaluate_loss_fixed_weights(const CriticEnsemble& ens,
                                          std::span<const Transition> batch,
                                          const TrainConfig& cfg, double discount,
                                          std::span<const double> ra_weights_norm,
                                          std::span<const double> reg_weights_norm) {
  return evaluate_impl(ens, batch, cfg, discount, /*want_grads=*/false, ra_weights_norm,
                       reg_weights_norm)
      .loss;
}

StepReport train_step(CriticEnsemble& ens, std::span<const Transition> batch,
                      const TrainConfig& cfg, double discount) {
  EvalResult ev = evaluate_impl(ens, batch, cfg, discount, /*want_grads=*/true);
  StepReport rep;
  rep.loss = std::move(ev.loss);
  if (!rep.loss.finite()) {
    return rep;  // leave the parameters untouched
  }
  ens.apply_update(ev.grads, cfg.lr);
  rep.applied = true;
  return rep;
}

// ---------------------------------------------------------------------------
// Experiment configuration: strict JSON in both directions.

namespace {

template <typename Enum>
struct EnumName {
  const char* name;
  Enum value;
};

constexpr EnumName<LossKind> kLossNames[] = {
    {"mse", LossKind::mse},
    {"gaussian_nll_biv", LossKind::gaussian_nll_biv},
    {"ggd_nll_biev", LossKind::ggd_nll_biev},
    {"ggd_nll_only", LossKind::ggd_nll_only},
};
constexpr EnumName<PolicyKind> kPolicyNames[] = {
    {"uniform_random", PolicyKind::uniform_random},
    {"eps_greedy", PolicyKind::eps_greedy},
};
constexpr EnumName<NoiseKind> kNoiseNames[] = {
    {"gaussian", NoiseKind::gaussian},
    {"laplace", NoiseKind::laplace},
    {"ggd", NoiseKind::ggd},
    {"gumbel", NoiseKind::gumbel},
};
constexpr EnumName<HeadKind> kHeadNames[] = {
    {"none", HeadKind::none},
    {"variance_head", HeadKind::variance_head},
    {"beta_head", HeadKind::beta_head},
    {"alpha_beta_heads", HeadKind::alpha_beta_heads},
};
constexpr EnumName<NllForm> kNllFormNames[] = {
    {"exact", NllForm::exact},
    {"modified", NllForm::modified},
};

template <typename Enum, std::size_t N>
Enum enum_from_name(const EnumName<Enum> (&table)[N], const std::string& s, const char* field) {
  for (const auto& e : table) {
    if (s == e.name) return e.value;
  }
  throw std::invalid_argument(std::string("ExperimentConfig: bad value '") + s + "' for " + field);
}

template <typename Enum, std::size_t N>
const char* enum_name(const EnumName<Enum> (&table)[N], Enum v) {
  for (const auto& e : table) {
    if (v == e.value) return e.name;
  }
  return "?";
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const char* where) {
  for (const auto& item : j.items()) {
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return item.key() == k; }) == known.end()) {
      throw std::invalid_argument(std::string("ExperimentConfig: unknown field '") + item.key() +
                                  "' in " + where);
    }
  }
}

ChainMDPSpec env_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"n_states", "n_actions", "discount", "reward_noise", "transition_noise",
                     "horizon", "seed"},
                 "env");
  ChainMDPSpec env;
  if (j.contains("n_states")) env.n_states = j["n_states"].get<std::size_t>();
  if (j.contains("n_actions")) env.n_actions = j["n_actions"].get<std::size_t>();
  if (j.contains("discount")) env.discount = j["discount"].get<double>();
  if (j.contains("transition_noise")) env.transition_noise = j["transition_noise"].get<double>();
  if (j.contains("horizon")) env.horizon = j["horizon"].get<std::size_t>();
  if (j.contains("seed")) env.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("reward_noise")) {
    const nlohmann::json& jn = j["reward_noise"];
    reject_unknown(jn, {"kind", "scale", "shape"}, "reward_noise");
    env.reward_noise.kind =
        enum_from_name(kNoiseNames, jn.at("kind").get<std::string>(), "reward_noise.kind");
    if (jn.contains("scale")) env.reward_noise.scale = jn["scale"].get<double>();
    if (jn.contains("shape")) env.reward_noise.shape = jn["shape"].get<double>();
  }
  return env;
}

nlohmann::json env_to_json(const ChainMDPSpec& env) {
  return {{"n_states", env.n_states},
          {"n_actions", env.n_actions},
          {"discount", env.discount},
          {"reward_noise",
           {{"kind", enum_name(kNoiseNames, env.reward_noise.kind)},
            {"scale", env.reward_noise.scale},
            {"shape", env.reward_noise.shape}}},
          {"transition_noise", env.transition_noise},
          {"horizon", env.horizon},
          {"seed", env.seed}};
}

TrainConfig agent_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"loss_kind", "nll_form", "policy", "epsilon", "lr", "batch_size",
                     "replay_capacity", "target_refresh", "n_critics", "hidden_dim", "head_kind",
                     "softplus_epsilon", "init_scale", "estimate_kappa"},
                 "agent");
  TrainConfig a;
  if (j.contains("loss_kind")) {
    a.loss_kind = enum_from_name(kLossNames, j["loss_kind"].get<std::string>(), "loss_kind");
  }
  a.head_kind = default_head_kind(a.loss_kind);
  if (j.contains("nll_form")) {
    a.nll_form = enum_from_name(kNllFormNames, j["nll_form"].get<std::string>(), "nll_form");
  }
  if (j.contains("policy")) {
    a.policy = enum_from_name(kPolicyNames, j["policy"].get<std::string>(), "policy");
  }
  if (j.contains("epsilon")) a.epsilon = j["epsilon"].get<double>();
  if (j.contains("lr")) a.lr = j["lr"].get<double>();
  if (j.contains("batch_size")) a.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("replay_capacity")) a.replay_capacity = j["replay_capacity"].get<std::size_t>();
  if (j.contains("target_refresh")) a.target_refresh = j["target_refresh"].get<std::size_t>();
  if (j.contains("n_critics")) a.n_critics = j["n_critics"].get<std::size_t>();
  if (j.contains("hidden_dim")) a.hidden_dim = j["hidden_dim"].get<std::size_t>();
  if (j.contains("head_kind")) {
    a.head_kind = enum_from_name(kHeadNames, j["head_kind"].get<std::string>(), "head_kind");
  }
  if (j.contains("softplus_epsilon")) a.softplus_epsilon = j["softplus_epsilon"].get<double>();
  if (j.contains("init_scale")) a.init_scale = j["init_scale"].get<double>();
  if (j.contains("estimate_kappa")) a.estimate_kappa = j["estimate_kappa"].get<bool>();
  return a;
}

nlohmann::json agent_to_json(const TrainConfig& a) {
  return {{"loss_kind", enum_name(kLossNames, a.loss_kind)},
          {"nll_form", enum_name(kNllFormNames, a.nll_form)},
          {"policy", enum_name(kPolicyNames, a.policy)},
          {"epsilon", a.epsilon},
          {"lr", a.lr},
          {"batch_size", a.batch_size},
          {"replay_capacity", a.replay_capacity},
          {"target_refresh", a.target_refresh},
          {"n_critics", a.n_critics},
          {"hidden_dim", a.hidden_dim},
          {"head_kind", enum_name(kHeadNames, a.head_kind)},
          {"softplus_epsilon", a.softplus_epsilon},
          {"init_scale", a.init_scale},
          {"estimate_kappa", a.estimate_kappa}};
}

}  // namespace

void ExperimentConfig::validate() const {
  env.validate();
  agent.validate();
  check(n_steps >= 1, "ExperimentConfig: n_steps must be >= 1");
  check(n_checkpoints >= 1 && n_checkpoints <= n_steps,
        "ExperimentConfig: n_checkpoints must be in [1, n_steps]");
  check(td_snapshot_size >= 2, "ExperimentConfig: td_snapshot_size must be >= 2");
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("ExperimentConfig: invalid JSON: ") + e.what());
  }
  check(j.is_object(), "ExperimentConfig: document must be a JSON object");
  reject_unknown(j, {"env", "agent", "weighting", "run"}, "config");

  ExperimentConfig cfg;
  try {
    if (j.contains("env")) cfg.env = env_from_json(j["env"]);
    if (j.contains("agent")) cfg.agent = agent_from_json(j["agent"]);
    if (j.contains("weighting")) {
      cfg.agent.weighting = WeightingConfig::from_json_text(j["weighting"].dump());
    }
    if (j.contains("run")) {
      const nlohmann::json& jr = j["run"];
      reject_unknown(jr, {"n_steps", "n_checkpoints", "td_snapshot_size", "seed"}, "run");
      if (jr.contains("n_steps")) cfg.n_steps = jr["n_steps"].get<std::size_t>();
      if (jr.contains("n_checkpoints")) cfg.n_checkpoints = jr["n_checkpoints"].get<std::size_t>();
      if (jr.contains("td_snapshot_size")) {
        cfg.td_snapshot_size = jr["td_snapshot_size"].get<std::size_t>();
      }
      if (jr.contains("seed")) cfg.seed = jr["seed"].get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("ExperimentConfig: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string ExperimentConfig::to_json_text() const {
  const nlohmann::json j{{"env", env_to_json(env)},
                         {"agent", agent_to_json(agent)},
                         {"weighting", nlohmann::json::parse(agent.weighting.to_json_text())},
                         {"run",
                          {{"n_steps", n_steps},
                           {"n_checkpoints", n_checkpoints},
                           {"td_snapshot_size", td_snapshot_size},
                           {"seed", seed}}}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// The experiment loop.

namespace {

double safe_cov(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return std::numeric_limits<double>::quiet_NaN();
  }
  const double m = mean_of(xs);
  if (m == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(bessel_variance(xs)) / std::fabs(m);
}

}  // namespace

TrainRunLog run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();

  ChainMDPSpec env_spec = cfg.env;
  env_spec.seed = mix_seed(cfg.env.seed, cfg.seed);
  ChainEnv env(env_spec);

  CriticConfig ccfg;
  ccfg.n_critics = cfg.agent.n_critics;
  ccfg.feature_dim = env_spec.n_states;
  ccfg.n_actions = env_spec.n_actions;
  ccfg.hidden_dim = cfg.agent.hidden_dim;
  ccfg.head_kind = cfg.agent.head_kind;
  ccfg.softplus_epsilon = cfg.agent.softplus_epsilon;
  ccfg.init_scale = cfg.agent.init_scale;
  ccfg.seed = mix_seed(cfg.seed, 1);
  CriticEnsemble ens(ccfg);

  Rng policy_rng(mix_seed(cfg.seed, 2));
  Rng replay_rng(mix_seed(cfg.seed, 3));
  Rng snapshot_rng(mix_seed(cfg.seed, 4));

  const std::vector<double> oracle = cfg.agent.policy == PolicyKind::uniform_random
                                         ? env.uniform_policy_q()
                                         : env.optimal_q();

  const std::size_t na = env_spec.n_actions;
  const std::size_t ns = env_spec.n_states;
  std::vector<double> feat(ns);

  const auto act = [&](std::size_t s) -> std::size_t {
    if (cfg.agent.policy == PolicyKind::uniform_random ||
        policy_rng.uniform() < cfg.agent.epsilon) {
      return policy_rng.uniform_index(na);
    }
    one_hot(s, feat);
    const EnsembleForward fwd = ens.forward(feat);
    std::size_t best_a = 0;
    double best = -1e300;
    for (std::size_t a = 0; a < na; ++a) {
      double m = 0.0;
      for (std::size_t i = 0; i < ccfg.n_critics; ++i) m += fwd.value(i, a, na);
      if (m > best) {
        best = m;
        best_a = a;
      }
    }
    return best_a;
  };

  std::vector<Transition> replay;
  replay.reserve(std::min(cfg.agent.replay_capacity, cfg.n_steps));
  std::size_t replay_write = 0;
  const auto push_transition = [&](const Transition& tr) {
    if (replay.size() < cfg.agent.replay_capacity) {
      replay.push_back(tr);
    } else {
      replay[replay_write] = tr;
      replay_write = (replay_write + 1) % cfg.agent.replay_capacity;
    }
  };

  const auto mean_values = [&]() {
    std::vector<double> q(ns * na, 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
      one_hot(s, feat);
      const EnsembleForward fwd = ens.forward(feat);
      for (std::size_t a = 0; a < na; ++a) {
        double m = 0.0;
        for (std::size_t i = 0; i < ccfg.n_critics; ++i) m += fwd.value(i, a, na);
        q[s * na + a] = m / static_cast<double>(ccfg.n_critics);
      }
    }
    return q;
  };

  TrainRunLog log;
  std::vector<Transition> batch(cfg.agent.batch_size);
  std::vector<double> completed_returns;
  double ep_return = 0.0;
  std::size_t updates = 0;
  const std::size_t interval = std::max<std::size_t>(1, cfg.n_steps / cfg.n_checkpoints);

  std::size_t s = env.reset();
  std::size_t a = act(s);

  const auto record_checkpoint = [&](std::size_t step) {
    CheckpointRow row;
    row.step = step;
    row.mean_return = completed_returns.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                : mean_of(completed_returns);
    completed_returns.clear();

    const bool has_beta = ccfg.head_kind == HeadKind::beta_head ||
                          ccfg.head_kind == HeadKind::alpha_beta_heads;
    const bool has_any_head = ccfg.head_kind != HeadKind::none;
    std::vector<double> beta_s;
    std::vector<double> var_s;
    if (has_any_head) {
      for (std::size_t st = 0; st < ns; ++st) {
        one_hot(st, feat);
        const EnsembleForward fwd = ens.forward(feat);
        double beta_mean = 0.0;
        double alpha_mean = 0.0;
        double sigma_mean = 0.0;
        for (const HeadOutput& h : fwd.heads) {
          beta_mean += h.beta;
          alpha_mean += h.alpha;
          sigma_mean += h.sigma;
        }
        const double kd = static_cast<double>(ccfg.n_critics);
        beta_mean /= kd;
        alpha_mean /= kd;
        sigma_mean /= kd;
        if (has_beta) beta_s.push_back(beta_mean);
        if (ccfg.head_kind == HeadKind::variance_head) {
          var_s.push_back(sigma_mean * sigma_mean);
        } else {
          var_s.push_back(variance(GGDParams{0.0, alpha_mean, beta_mean}));
        }
      }
    }
    row.cov_beta = has_beta ? safe_cov(beta_s) : std::numeric_limits<double>::quiet_NaN();
    row.cov_variance = has_any_head ? safe_cov(var_s) : std::numeric_limits<double>::quiet_NaN();

    const std::vector<double> q = mean_values();
    double se = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) se += (q[k] - oracle[k]) * (q[k] - oracle[k]);
    row.value_rmse = std::sqrt(se / static_cast<double>(q.size()));

    log.timeseries.push_back(row);
    if (has_beta) log.beta_by_state.push_back(beta_s);
    if (has_any_head) log.variance_by_state.push_back(var_s);

    // TD-error snapshot from the replay buffer under the current critic
    // (frozen targets, like training itself).
    const std::size_t m = std::min(cfg.td_snapshot_size, replay.size());
    if (m >= 2) {
      std::vector<Transition> probe(m);
      for (Transition& tr : probe) tr = replay[snapshot_rng.uniform_index(replay.size())];
      const BatchTensors bt = compute_batch_tensors(ens, probe, cfg.agent, env_spec.discount);
      log.snapshot_steps.push_back(step);
      log.td_snapshots.push_back(bt.diag.deltas);
    }
  };

  for (std::size_t step = 1; step <= cfg.n_steps; ++step) {
    const ChainEnv::StepResult sr = env.step(a);
    ep_return += sr.reward;
    const std::size_t s2 = sr.next_state;
    const std::size_t a2 = act(s2);
    push_transition({s, a, sr.reward, s2, a2, sr.episode_end});
    if (sr.episode_end) {
      completed_returns.push_back(ep_return);
      ep_return = 0.0;
      s = env.reset();
      a = act(s);
    } else {
      s = s2;
      a = a2;
    }

    if (replay.size() >= cfg.agent.batch_size) {
      for (Transition& tr : batch) tr = replay[replay_rng.uniform_index(replay.size())];
      train_step(ens, batch, cfg.agent, env_spec.discount);
      ++updates;
      if (updates % cfg.agent.target_refresh == 0) ens.refresh_frozen();
    }

    if (step % interval == 0 || step == cfg.n_steps) {
      if (log.timeseries.empty() || log.timeseries.back().step != step) {
        record_checkpoint(step);
      }
    }
  }

  // run.json: config echo, seed, final summary.
  nlohmann::json final_summary;
  const CheckpointRow& last = log.timeseries.back();
  final_summary["value_rmse"] = last.value_rmse;
  final_summary["mean_return"] =
      std::isfinite(last.mean_return) ? nlohmann::json(last.mean_return) : nlohmann::json();
  final_summary["cov_beta"] =
      std::isfinite(last.cov_beta) ? nlohmann::json(last.cov_beta) : nlohmann::json();
  final_summary["cov_variance"] =
      std::isfinite(last.cov_variance) ? nlohmann::json(last.cov_variance) : nlohmann::json();
  final_summary["fitted_beta"] = nlohmann::json();
  final_summary["fitted_beta_converged"] = false;
  if (!log.td_snapshots.empty() && log.td_snapshots.back().size() >= 10) {
    try {
      const FitResult fit = fit_mle(log.td_snapshots.back(), FitMode::beta_only);
      final_summary["fitted_beta"] = fit.params.beta;
      final_summary["fitted_beta_converged"] = fit.converged;
    } catch (const std::exception&) {
      // degenerate snapshot (e.g. all-zero errors); leave null
    }
  }

  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(cfg.to_json_text());
  meta["seed"] = cfg.seed;
  meta["final"] = final_summary;
  meta["checkpoints"] = {{"beta_by_state", log.beta_by_state},
                         {"variance_by_state", log.variance_by_state}};
  log.meta_json = meta.dump(2) + "\n";
  return log;
}

}  // namespace ggtde
