#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ggtde/chain_env.hpp"
#include "ggtde/critic_ensemble.hpp"
#include "ggtde/run_log.hpp"
#include "ggtde/weighting.hpp"

// Semi-gradient TD learning on the chain environment with an ensemble of
// critics.  Bootstrap targets come from the frozen parameter copy; the
// batch weights are treated as constants of the optimization (computed,
// then detached), so only the value and head outputs carry gradients.

namespace ggtde {

enum class LossKind {
  mse,               // plain squared TD error, no heads
  gaussian_nll_biv,  // heteroscedastic Gaussian NLL + BIV-weighted penalty
  ggd_nll_biev,      // shape NLL + inverse-error-variance penalty
  ggd_nll_only,      // shape NLL alone (penalty ablated away)
};

enum class PolicyKind {
  uniform_random,  // on-policy bootstrap from the stored next action
  eps_greedy,      // greedy bootstrap on the frozen ensemble mean
};

struct Transition {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
  std::size_t next_action = 0;  // the action actually taken at next_state
  bool truncated = false;       // time-limit cut; bootstrapping continues
};

struct TrainConfig {
  LossKind loss_kind = LossKind::ggd_nll_biev;
  NllForm nll_form = NllForm::modified;
  PolicyKind policy = PolicyKind::uniform_random;
  double epsilon = 0.1;  // eps_greedy exploration rate
  double lr = 0.05;
  std::size_t batch_size = 32;
  std::size_t replay_capacity = 10000;
  std::size_t target_refresh = 100;  // updates between frozen snapshots
  std::size_t n_critics = 5;
  std::size_t hidden_dim = 16;
  HeadKind head_kind = HeadKind::beta_head;
  double softplus_epsilon = 1e-3;
  double init_scale = 0.1;
  // Pool the per-critic TD-error kurtosis of each batch into the MBBE
  // correction instead of using the configured constant.
  bool estimate_kappa = false;
  WeightingConfig weighting;

  void validate() const;  // throws std::invalid_argument
};

// The head kind each loss expects; validate() enforces the pairing.
HeadKind default_head_kind(LossKind kind);

struct LossBreakdown {
  double total = 0.0;
  double attenuation = 0.0;     // NLL / squared-error part
  double regularization = 0.0;  // weighted error penalty
  TDErrorBatch diagnostics;     // per-sample scalars the weights were built from
  std::string diverged;         // term name if non-finite, else empty
  bool finite() const { return diverged.empty(); }
};

// Loss and diagnostics of one batch under the current parameters and
// frozen targets; pure (no update).
LossBreakdown evaluate_loss(const CriticEnsemble& ens, std::span<const Transition> batch,
                            const TrainConfig& cfg, double discount);

// Same loss, but with the normalized risk and regularization weight
// vectors pinned to the given values instead of recomputed from the batch.
// train_step treats both vectors as constants of the optimization, so a
// finite-difference probe of its gradient must hold them fixed the same
// way; this is the hook for that.  Pass an empty span for a vector the
// loss kind does not use.
LossBreakdown evaluate_loss_fixed_weights(const CriticEnsemble& ens,
                                          std::span<const Transition> batch,
                                          const TrainConfig& cfg, double discount,
                                          std::span<const double> ra_weights_norm,
                                          std::span<const double> reg_weights_norm);

struct StepReport {
  LossBreakdown loss;
  bool applied = false;  // false when a non-finite loss aborted the update
};

// One SGD step on the batch.  A non-finite loss leaves the parameters
// untouched and reports which term diverged.
StepReport train_step(CriticEnsemble& ens, std::span<const Transition> batch,
                      const TrainConfig& cfg, double discount);

struct ExperimentConfig {
  ChainMDPSpec env;
  TrainConfig agent;
  std::size_t n_steps = 50000;
  std::size_t n_checkpoints = 20;
  std::size_t td_snapshot_size = 512;
  std::uint64_t seed = 0;

  void validate() const;

  // Strict JSON (unknown fields rejected); absent fields keep defaults.
  static ExperimentConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

// Runs the full loop: act, store, train, refresh, checkpoint.  Two calls
// with equal configs produce bit-identical logs.
TrainRunLog run_experiment(const ExperimentConfig& cfg);

}  // namespace ggtde
