#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ggtde/rng.hpp"

// A small chain MDP for desk-scale value-learning experiments.  States sit
// on a line; action 0 moves left, action 1 moves right (both clamped at
// the ends), and any further actions stay put.  Rewards are a fixed
// per-(state, action) base table plus zero-mean noise whose tail shape is
// configurable, which is the whole point of the environment.  Episodes end
// by time limit only, so value estimates should bootstrap through the
// reset (the cut is a truncation, not a terminal state).

namespace ggtde {

enum class NoiseKind { gaussian, laplace, ggd, gumbel };

struct RewardNoise {
  NoiseKind kind = NoiseKind::gaussian;
  double scale = 1.0;  // sigma / Laplace scale / GGD alpha / Gumbel scale
  double shape = 1.0;  // GGD beta; ignored by the other kinds
};

struct ChainMDPSpec {
  std::size_t n_states = 5;
  std::size_t n_actions = 2;
  double discount = 0.9;
  RewardNoise reward_noise;
  // Probability that a step lands on a uniformly random state instead of
  // the deterministic neighbor.
  double transition_noise = 0.0;
  std::size_t horizon = 50;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

class ChainEnv {
 public:
  explicit ChainEnv(const ChainMDPSpec& spec);

  struct StepResult {
    std::size_t next_state = 0;
    double reward = 0.0;
    bool episode_end = false;  // time-limit truncation
  };

  std::size_t reset();
  StepResult step(std::size_t action);

  const ChainMDPSpec& spec() const { return spec_; }
  std::size_t state() const { return state_; }

  // Exact model quantities, for the oracle values below.
  double base_reward(std::size_t s, std::size_t a) const;
  double transition_prob(std::size_t s, std::size_t a, std::size_t s2) const;

  // Infinite-horizon action values of the greedy-optimal policy, by value
  // iteration on the exact model.
  std::vector<double> optimal_q() const;  // [s * n_actions + a]

  // Action values of a fixed stochastic policy given per-state action
  // probabilities, flattened the same way.
  std::vector<double> policy_q(std::span<const double> policy) const;

  // Q^pi for the uniform-random policy.
  std::vector<double> uniform_policy_q() const;

 private:
  std::size_t deterministic_next(std::size_t s, std::size_t a) const;
  double noise_draw();

  ChainMDPSpec spec_;
  std::vector<double> base_r_;
  Rng rng_;
  std::size_t state_ = 0;
  std::size_t steps_in_episode_ = 0;
};

}  // namespace ggtde
