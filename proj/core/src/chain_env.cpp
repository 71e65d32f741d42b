#include "ggtde/chain_env.hpp"

#include <cmath>
#include <stdexcept>

#include "ggtde/ggd.hpp"

namespace ggtde {

namespace {

constexpr double kEulerGamma = 0.57721566490153286;

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void ChainMDPSpec::validate() const {
  check(n_states >= 2, "ChainMDPSpec: need at least 2 states");
  check(n_actions >= 1, "ChainMDPSpec: need at least 1 action");
  check(discount >= 0.0 && discount < 1.0, "ChainMDPSpec: discount must be in [0, 1)");
  check(transition_noise >= 0.0 && transition_noise <= 1.0,
        "ChainMDPSpec: transition_noise must be in [0, 1]");
  check(horizon >= 1, "ChainMDPSpec: horizon must be >= 1");
  check(std::isfinite(reward_noise.scale) && reward_noise.scale >= 0.0,
        "ChainMDPSpec: noise scale must be >= 0");
  if (reward_noise.kind == NoiseKind::ggd) {
    check(std::isfinite(reward_noise.shape) && reward_noise.shape > 0.0,
          "ChainMDPSpec: GGD noise needs a positive shape");
  }
}

ChainEnv::ChainEnv(const ChainMDPSpec& spec)
    : spec_(spec), rng_(mix_seed(spec.seed, 0x1c4a1e)) {
  spec_.validate();
  // The base reward table is a deterministic function of the seed, drawn
  // from a stream separate from the step noise.
  Rng table_rng(mix_seed(spec.seed, 0xba5e));
  base_r_.resize(spec_.n_states * spec_.n_actions);
  for (double& r : base_r_) r = 2.0 * table_rng.uniform() - 1.0;
}

std::size_t ChainEnv::reset() {
  state_ = 0;
  steps_in_episode_ = 0;
  return state_;
}

std::size_t ChainEnv::deterministic_next(std::size_t s, std::size_t a) const {
  if (a == 0) return s == 0 ? 0 : s - 1;
  if (a == 1) return std::min(s + 1, spec_.n_states - 1);
  return s;  // extra actions stay put
}

double ChainEnv::noise_draw() {
  const RewardNoise& nz = spec_.reward_noise;
  if (nz.scale == 0.0) return 0.0;
  switch (nz.kind) {
    case NoiseKind::gaussian:
      return nz.scale * rng_.normal();
    case NoiseKind::laplace: {
      const double mag = -nz.scale * std::log(rng_.uniform_open());
      return rng_.uniform() < 0.5 ? -mag : mag;
    }
    case NoiseKind::ggd:
      return sample_one(GGDParams{0.0, nz.scale, nz.shape}, rng_);
    case NoiseKind::gumbel:
      // Centered so every noise kind is zero-mean and the base table alone
      // fixes the expected rewards.
      return -nz.scale * std::log(-std::log(rng_.uniform_open())) - nz.scale * kEulerGamma;
  }
  return 0.0;
}

ChainEnv::StepResult ChainEnv::step(std::size_t action) {
  if (action >= spec_.n_actions) {
    throw std::invalid_argument("ChainEnv::step: action out of range");
  }
  StepResult res;
  res.reward = base_reward(state_, action) + noise_draw();
  if (spec_.transition_noise > 0.0 && rng_.uniform() < spec_.transition_noise) {
    res.next_state = rng_.uniform_index(spec_.n_states);
  } else {
    res.next_state = deterministic_next(state_, action);
  }
  ++steps_in_episode_;
  res.episode_end = steps_in_episode_ >= spec_.horizon;
  state_ = res.next_state;
  return res;
}

double ChainEnv::base_reward(std::size_t s, std::size_t a) const {
  return base_r_[s * spec_.n_actions + a];
}

double ChainEnv::transition_prob(std::size_t s, std::size_t a, std::size_t s2) const {
  const double uniform_part = spec_.transition_noise / static_cast<double>(spec_.n_states);
  const double det_part = deterministic_next(s, a) == s2 ? 1.0 - spec_.transition_noise : 0.0;
  return uniform_part + det_part;
}

namespace {

// Shared value-iteration loop; `backup(s2, q)` gives the next-state value
// under whichever policy is being evaluated.
template <typename Backup>
std::vector<double> value_iterate(const ChainEnv& env, Backup backup) {
  const ChainMDPSpec& spec = env.spec();
  const std::size_t ns = spec.n_states;
  const std::size_t na = spec.n_actions;
  std::vector<double> q(ns * na, 0.0);
  std::vector<double> next(ns * na, 0.0);
  for (int iter = 0; iter < 1000000; ++iter) {
    double max_diff = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) {
        double v = env.base_reward(s, a);
        for (std::size_t s2 = 0; s2 < ns; ++s2) {
          const double p = env.transition_prob(s, a, s2);
          if (p > 0.0) v += spec.discount * p * backup(s2, q);
        }
        next[s * na + a] = v;
        max_diff = std::max(max_diff, std::fabs(v - q[s * na + a]));
      }
    }
    q.swap(next);
    if (max_diff < 1e-13) break;
  }
  return q;
}

}  // namespace

std::vector<double> ChainEnv::optimal_q() const {
  const std::size_t na = spec_.n_actions;
  return value_iterate(*this, [na](std::size_t s2, const std::vector<double>& q) {
    double best = q[s2 * na];
    for (std::size_t a = 1; a < na; ++a) best = std::max(best, q[s2 * na + a]);
    return best;
  });
}

std::vector<double> ChainEnv::policy_q(std::span<const double> policy) const {
  const std::size_t ns = spec_.n_states;
  const std::size_t na = spec_.n_actions;
  if (policy.size() != ns * na) {
    throw std::invalid_argument("ChainEnv::policy_q: policy must be n_states * n_actions long");
  }
  for (std::size_t s = 0; s < ns; ++s) {
    double row = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      const double p = policy[s * na + a];
      if (!(p >= 0.0)) throw std::invalid_argument("ChainEnv::policy_q: negative probability");
      row += p;
    }
    if (std::fabs(row - 1.0) > 1e-9) {
      throw std::invalid_argument("ChainEnv::policy_q: action probabilities must sum to 1");
    }
  }
  return value_iterate(*this, [&](std::size_t s2, const std::vector<double>& q) {
    double v = 0.0;
    for (std::size_t a = 0; a < na; ++a) v += policy[s2 * na + a] * q[s2 * na + a];
    return v;
  });
}

std::vector<double> ChainEnv::uniform_policy_q() const {
  const std::vector<double> policy(spec_.n_states * spec_.n_actions,
                                   1.0 / static_cast<double>(spec_.n_actions));
  return policy_q(policy);
}

}  // namespace ggtde
