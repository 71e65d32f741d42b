#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// An ensemble of small independent critics.  Each critic is a
// one-hidden-layer tanh network over state features with a linear action-
// value layer and an optional positive head (predicted noise scale or
// shape) mapped through softplus-plus-epsilon and clamped to the library
// box constraints.  Gradients are analytic; there is no autodiff anywhere.
//
// The ensemble keeps a frozen copy of its parameters for bootstrap
// targets; refresh_frozen() snapshots the live parameters into it.

namespace ggtde {

// Clamp box for a predicted Gaussian sigma head.
inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kSigmaMax = 1e3;

enum class HeadKind {
  none,              // values only
  variance_head,     // one positive output, read as sigma
  beta_head,         // one positive output, read as GGD shape
  alpha_beta_heads,  // two positive outputs: GGD scale and shape
};

struct CriticConfig {
  std::size_t n_critics = 5;
  std::size_t feature_dim = 5;  // one-hot states in the chain experiments
  std::size_t n_actions = 2;
  std::size_t hidden_dim = 16;
  HeadKind head_kind = HeadKind::beta_head;
  double softplus_epsilon = 1e-3;
  double init_scale = 0.1;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
  std::size_t head_dim() const;
  std::size_t params_per_critic() const;
};

// Positive head outputs, populated according to the configured head kind;
// untouched fields keep these neutral defaults.
struct HeadOutput {
  double sigma = 1.0;
  double alpha = 1.0;
  double beta = 2.0;
};

struct EnsembleForward {
  std::vector<double> values;      // [critic * n_actions + action]
  std::vector<HeadOutput> heads;   // one per critic

  double value(std::size_t critic, std::size_t action, std::size_t n_actions) const {
    return values[critic * n_actions + action];
  }
};

class CriticEnsemble {
 public:
  explicit CriticEnsemble(const CriticConfig& cfg);

  const CriticConfig& config() const { return cfg_; }

  EnsembleForward forward(std::span<const double> features) const;
  EnsembleForward forward_frozen(std::span<const double> features) const;

  void refresh_frozen();

  std::vector<double>& critic_params(std::size_t critic) { return params_.at(critic); }
  const std::vector<double>& critic_params(std::size_t critic) const {
    return params_.at(critic);
  }

  // Adds to `grad` the gradient of a scalar loss with respect to this
  // critic's parameters, given the upstream derivatives with respect to
  // its action values (length n_actions) and its clamped head outputs
  // (length head_dim; derivatives vanish where a head sits on its clamp).
  void accumulate_gradient(std::size_t critic, std::span<const double> features,
                           std::span<const double> d_values, std::span<const double> d_heads,
                           std::vector<double>& grad) const;

  // theta_i -= lr * grads[i] for every critic.
  void apply_update(std::span<const std::vector<double>> grads, double lr);

 private:
  struct Activations {
    std::vector<double> hidden;    // tanh outputs
    std::vector<double> values;    // n_actions
    std::vector<double> head_pre;  // pre-softplus head inputs
  };
  Activations run_critic(const std::vector<double>& theta,
                         std::span<const double> features) const;
  EnsembleForward forward_with(const std::vector<std::vector<double>>& params,
                               std::span<const double> features) const;
  HeadOutput map_heads(std::span<const double> head_pre) const;

  CriticConfig cfg_;
  std::vector<std::vector<double>> params_;
  std::vector<std::vector<double>> frozen_;
};

}  // namespace ggtde
