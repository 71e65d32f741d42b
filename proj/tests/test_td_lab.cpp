#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <unistd.h>
#include <utility>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ggtde/chain_env.hpp"
#include "ggtde/critic_ensemble.hpp"
#include "ggtde/run_log.hpp"
#include "ggtde/train.hpp"
#include "ggtde/weighting.hpp"

using namespace ggtde;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir =
      fs::temp_directory_path() / ("ggtde_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Environment model

TEST_CASE("chain transition model is a proper stochastic matrix") {
  ChainMDPSpec spec;
  spec.n_states = 6;
  spec.n_actions = 3;  // left, right, stay
  spec.transition_noise = 0.2;
  spec.seed = 3;
  const ChainEnv env(spec);
  for (std::size_t s = 0; s < spec.n_states; ++s) {
    for (std::size_t a = 0; a < spec.n_actions; ++a) {
      double total = 0.0;
      for (std::size_t s2 = 0; s2 < spec.n_states; ++s2) {
        const double p = env.transition_prob(s, a, s2);
        CHECK(p >= 0.0);
        total += p;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("optimal action values satisfy the Bellman optimality equation") {
  ChainMDPSpec spec;
  spec.n_states = 8;
  spec.transition_noise = 0.15;
  spec.discount = 0.92;
  spec.seed = 17;
  const ChainEnv env(spec);
  const std::vector<double> q = env.optimal_q();
  REQUIRE(q.size() == spec.n_states * spec.n_actions);
  for (std::size_t s = 0; s < spec.n_states; ++s) {
    for (std::size_t a = 0; a < spec.n_actions; ++a) {
      double rhs = env.base_reward(s, a);
      for (std::size_t s2 = 0; s2 < spec.n_states; ++s2) {
        const double p = env.transition_prob(s, a, s2);
        const double vmax = std::max(q[s2 * spec.n_actions], q[s2 * spec.n_actions + 1]);
        rhs += spec.discount * p * vmax;
      }
      CHECK(q[s * spec.n_actions + a] == doctest::Approx(rhs).epsilon(1e-9));
    }
  }
}

TEST_CASE("the optimal policy dominates the uniform one pointwise") {
  ChainMDPSpec spec;
  spec.n_states = 7;
  spec.transition_noise = 0.1;
  spec.seed = 41;
  const ChainEnv env(spec);
  const auto q_star = env.optimal_q();
  const auto q_unif = env.uniform_policy_q();
  REQUIRE(q_star.size() == q_unif.size());
  for (std::size_t k = 0; k < q_star.size(); ++k) {
    CHECK(q_star[k] >= q_unif[k] - 1e-9);
  }
  // uniform_policy_q is policy_q at the uniform policy.
  const std::vector<double> uniform(spec.n_states * spec.n_actions,
                                    1.0 / static_cast<double>(spec.n_actions));
  const auto q_explicit = env.policy_q(uniform);
  for (std::size_t k = 0; k < q_star.size(); ++k) {
    CHECK(q_unif[k] == doctest::Approx(q_explicit[k]).epsilon(1e-10));
  }
}

TEST_CASE("policy_q validates its policy argument") {
  ChainMDPSpec spec;
  spec.seed = 1;
  const ChainEnv env(spec);
  CHECK_THROWS_AS(env.policy_q(std::vector<double>{0.5, 0.5}), std::invalid_argument);
  std::vector<double> bad(spec.n_states * spec.n_actions, 0.4);  // rows sum to 0.8
  CHECK_THROWS_AS(env.policy_q(bad), std::invalid_argument);
  bad.assign(spec.n_states * spec.n_actions, 0.5);
  bad[0] = -0.1;
  bad[1] = 1.1;
  CHECK_THROWS_AS(env.policy_q(bad), std::invalid_argument);
}

TEST_CASE("episodes truncate exactly at the horizon and resets restart them") {
  ChainMDPSpec spec;
  spec.horizon = 7;
  spec.seed = 5;
  ChainEnv env(spec);
  CHECK(env.reset() == 0);
  for (int round = 0; round < 3; ++round) {
    for (std::size_t i = 1; i <= spec.horizon; ++i) {
      const auto res = env.step(1);
      CHECK(res.episode_end == (i == spec.horizon));
    }
    env.reset();
  }
  CHECK_THROWS_AS(env.step(99), std::invalid_argument);
}

TEST_CASE("environment rollouts are deterministic in the seed") {
  ChainMDPSpec spec;
  spec.reward_noise.kind = NoiseKind::laplace;
  spec.reward_noise.scale = 2.0;
  spec.seed = 77;
  ChainEnv a(spec);
  ChainEnv b(spec);
  a.reset();
  b.reset();
  for (int i = 0; i < 200; ++i) {
    const auto ra = a.step(i % 2);
    const auto rb = b.step(i % 2);
    CHECK(ra.reward == rb.reward);
    CHECK(ra.next_state == rb.next_state);
  }
}

TEST_CASE("spec validation rejects malformed environments") {
  ChainMDPSpec spec;
  spec.n_states = 1;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = ChainMDPSpec{};
  spec.discount = 1.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = ChainMDPSpec{};
  spec.transition_noise = 1.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = ChainMDPSpec{};
  spec.reward_noise.kind = NoiseKind::ggd;
  spec.reward_noise.shape = 0.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Critic ensemble

TEST_CASE("critic forward pass and frozen copies") {
  CriticConfig cfg;
  cfg.n_critics = 3;
  cfg.feature_dim = 4;
  cfg.hidden_dim = 5;
  cfg.head_kind = HeadKind::alpha_beta_heads;
  cfg.seed = 9;
  CriticEnsemble ens(cfg);

  const std::vector<double> feat = {0.0, 1.0, 0.0, 0.0};
  const EnsembleForward f0 = ens.forward(feat);
  REQUIRE(f0.values.size() == cfg.n_critics * cfg.n_actions);
  REQUIRE(f0.heads.size() == cfg.n_critics);
  for (const HeadOutput& h : f0.heads) {
    CHECK(h.alpha > 0.0);
    CHECK(h.beta > 0.0);
  }
  // Independent critics: at least two of them disagree after random init.
  CHECK(f0.value(0, 0, cfg.n_actions) != f0.value(1, 0, cfg.n_actions));

  // Zeroing one critic's parameters zeroes its values and sends its heads
  // to softplus(0) + epsilon.
  std::fill(ens.critic_params(0).begin(), ens.critic_params(0).end(), 0.0);
  const EnsembleForward f1 = ens.forward(feat);
  CHECK(f1.value(0, 0, cfg.n_actions) == 0.0);
  CHECK(f1.heads[0].beta ==
        doctest::Approx(std::log(2.0) + cfg.softplus_epsilon).epsilon(1e-12));

  // The frozen copy still reflects construction time until refreshed.
  const EnsembleForward frz = ens.forward_frozen(feat);
  CHECK(frz.value(0, 0, cfg.n_actions) == f0.value(0, 0, cfg.n_actions));
  ens.refresh_frozen();
  const EnsembleForward frz2 = ens.forward_frozen(feat);
  CHECK(frz2.value(0, 0, cfg.n_actions) == 0.0);

  CHECK_THROWS_AS(ens.forward(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("critic config validation") {
  CriticConfig cfg;
  cfg.n_critics = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CriticConfig{};
  cfg.hidden_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CriticConfig{};
  cfg.init_scale = -0.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = CriticConfig{};
  cfg.head_kind = HeadKind::none;
  CHECK(cfg.head_dim() == 0);
  cfg.head_kind = HeadKind::alpha_beta_heads;
  CHECK(cfg.head_dim() == 2);
}

// ---------------------------------------------------------------------------
// Loss gradients: analytic backprop vs central finite differences, with the
// batch weights held fixed exactly as train_step holds them.

namespace {

std::vector<Transition> probe_batch() {
  return {
      {0, 1, 0.7, 1, 0, false},  {2, 0, -1.3, 1, 1, false}, {4, 1, 0.25, 4, 0, false},
      {1, 0, 2.1, 0, 1, false},  {3, 1, -0.6, 4, 1, true},  {2, 1, 0.05, 3, 0, false},
  };
}

TrainConfig config_for(LossKind kind) {
  TrainConfig cfg;
  cfg.loss_kind = kind;
  cfg.head_kind = default_head_kind(kind);
  cfg.batch_size = 6;
  cfg.lr = 1e-3;
  cfg.weighting.xi.min_effective_batch = 4;
  cfg.weighting.ensemble_size = 3;
  return cfg;
}

CriticEnsemble ensemble_for(const TrainConfig& cfg, std::uint64_t seed) {
  CriticConfig ccfg;
  ccfg.n_critics = 3;
  ccfg.feature_dim = 5;
  ccfg.n_actions = 2;
  ccfg.hidden_dim = 6;
  ccfg.head_kind = cfg.head_kind;
  ccfg.init_scale = 0.3;
  ccfg.seed = seed;
  return CriticEnsemble(ccfg);
}

// The normalized weight vectors the evaluation would compute, rebuilt from
// the reported diagnostics so the finite-difference loss can pin them.
std::pair<std::vector<double>, std::vector<double>> detached_weights(
    const TDErrorBatch& diag, const TrainConfig& cfg) {
  std::vector<double> ra;
  std::vector<double> reg;
  if (cfg.loss_kind == LossKind::ggd_nll_biev || cfg.loss_kind == LossKind::ggd_nll_only) {
    ra = normalize_weights(ra_weights(diag, cfg.weighting.ra_mode));
  }
  if (cfg.loss_kind == LossKind::gaussian_nll_biv) {
    reg = normalize_weights(biv_weights(diag, cfg.weighting));
  } else if (cfg.loss_kind == LossKind::ggd_nll_biev) {
    reg = normalize_weights(cfg.weighting.scheme == WeightScheme::biv
                                ? biv_weights(diag, cfg.weighting)
                                : biev_weights(diag, cfg.weighting));
  }
  return {ra, reg};
}

void check_gradients(LossKind kind, NllForm form) {
  TrainConfig cfg = config_for(kind);
  cfg.nll_form = form;
  CriticEnsemble ens = ensemble_for(cfg, 1234);
  const auto batch = probe_batch();
  const double discount = 0.9;

  const LossBreakdown base = evaluate_loss(ens, batch, cfg, discount);
  REQUIRE(base.finite());
  const auto [ra_w, reg_w] = detached_weights(base.diagnostics, cfg);

  // Pinning the weights must reproduce the live loss at the base point.
  const LossBreakdown pinned =
      evaluate_loss_fixed_weights(ens, batch, cfg, discount, ra_w, reg_w);
  CHECK(pinned.total == doctest::Approx(base.total).epsilon(1e-13));

  // Analytic gradient, recovered from one SGD step.
  CriticEnsemble stepped = ens;
  const StepReport rep = train_step(stepped, batch, cfg, discount);
  REQUIRE(rep.applied);

  const double h = 1e-5;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::vector<double> theta0 = ens.critic_params(i);
    for (std::size_t k = 0; k < theta0.size(); ++k) {
      const double analytic =
          (ens.critic_params(i)[k] - stepped.critic_params(i)[k]) / cfg.lr;

      ens.critic_params(i)[k] = theta0[k] + h;
      const double up =
          evaluate_loss_fixed_weights(ens, batch, cfg, discount, ra_w, reg_w).total;
      ens.critic_params(i)[k] = theta0[k] - h;
      const double dn =
          evaluate_loss_fixed_weights(ens, batch, cfg, discount, ra_w, reg_w).total;
      ens.critic_params(i)[k] = theta0[k];

      const double fd = (up - dn) / (2.0 * h);
      const double tol = 1e-4 * std::max({std::fabs(fd), std::fabs(analytic), 1e-4});
      INFO("critic " << i << " param " << k << " analytic=" << analytic << " fd=" << fd);
      CHECK(std::fabs(analytic - fd) <= tol);
      ++checked;
    }
  }
  CHECK(checked >= 100);  // the whole parameter vector, not a token sample
}

}  // namespace

TEST_CASE("analytic gradients match finite differences for every loss kind") {
  SUBCASE("mse") { check_gradients(LossKind::mse, NllForm::modified); }
  SUBCASE("gaussian_nll_biv") {
    check_gradients(LossKind::gaussian_nll_biv, NllForm::modified);
  }
  SUBCASE("ggd_nll_biev modified") {
    check_gradients(LossKind::ggd_nll_biev, NllForm::modified);
  }
  SUBCASE("ggd_nll_biev exact") { check_gradients(LossKind::ggd_nll_biev, NllForm::exact); }
  SUBCASE("ggd_nll_only modified") {
    check_gradients(LossKind::ggd_nll_only, NllForm::modified);
  }
  SUBCASE("alpha_beta_heads") {
    TrainConfig cfg = config_for(LossKind::ggd_nll_biev);
    cfg.head_kind = HeadKind::alpha_beta_heads;
    CriticEnsemble ens = ensemble_for(cfg, 88);
    const auto batch = probe_batch();
    const LossBreakdown base = evaluate_loss(ens, batch, cfg, 0.9);
    REQUIRE(base.finite());
    const auto [ra_w, reg_w] = detached_weights(base.diagnostics, cfg);
    CriticEnsemble stepped = ens;
    REQUIRE(train_step(stepped, batch, cfg, 0.9).applied);
    const double h = 1e-5;
    for (std::size_t i = 0; i < 3; ++i) {
      const std::vector<double> theta = ens.critic_params(i);
      for (std::size_t k = 0; k < theta.size(); ++k) {
        const double analytic =
            (ens.critic_params(i)[k] - stepped.critic_params(i)[k]) / cfg.lr;
        ens.critic_params(i)[k] = theta[k] + h;
        const double up = evaluate_loss_fixed_weights(ens, batch, cfg, 0.9, ra_w, reg_w).total;
        ens.critic_params(i)[k] = theta[k] - h;
        const double dn = evaluate_loss_fixed_weights(ens, batch, cfg, 0.9, ra_w, reg_w).total;
        ens.critic_params(i)[k] = theta[k];
        const double fd = (up - dn) / (2.0 * h);
        CHECK(std::fabs(analytic - fd) <=
              1e-4 * std::max({std::fabs(fd), std::fabs(analytic), 1e-4}));
      }
    }
  }
}

TEST_CASE("loss/head pairing is enforced") {
  TrainConfig cfg = config_for(LossKind::mse);
  cfg.head_kind = HeadKind::beta_head;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = config_for(LossKind::gaussian_nll_biv);
  cfg.head_kind = HeadKind::none;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = config_for(LossKind::ggd_nll_biev);
  cfg.head_kind = HeadKind::variance_head;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = config_for(LossKind::ggd_nll_biev);
  cfg.head_kind = HeadKind::alpha_beta_heads;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("training drives the TD errors of a tiny fixed point to zero") {
  // Two transitions on a single self-looping state pin the unique fixed
  // point Q(0,1) = 1 + 0.5 Q(0,0), Q(0,0) = 0.5 Q(0,1), i.e. (2/3, 4/3).
  const std::vector<Transition> batch = {
      {0, 1, 1.0, 0, 0, false},
      {0, 0, 0.0, 0, 1, false},
  };
  TrainConfig cfg = config_for(LossKind::mse);
  cfg.head_kind = HeadKind::none;
  cfg.batch_size = 2;
  cfg.lr = 0.1;

  CriticConfig ccfg;
  ccfg.n_critics = 2;
  ccfg.feature_dim = 1;
  ccfg.n_actions = 2;
  ccfg.hidden_dim = 8;
  ccfg.head_kind = HeadKind::none;
  ccfg.seed = 21;
  CriticEnsemble ens(ccfg);

  for (int step = 1; step <= 6000; ++step) {
    REQUIRE(train_step(ens, batch, cfg, 0.5).applied);
    if (step % 50 == 0) ens.refresh_frozen();
  }
  ens.refresh_frozen();

  const LossBreakdown final_loss = evaluate_loss(ens, batch, cfg, 0.5);
  CHECK(std::fabs(final_loss.diagnostics.deltas[0]) < 1e-3);
  CHECK(std::fabs(final_loss.diagnostics.deltas[1]) < 1e-3);

  const std::vector<double> feat = {1.0};
  const EnsembleForward fwd = ens.forward(feat);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(fwd.value(i, 1, 2) == doctest::Approx(4.0 / 3.0).epsilon(5e-3));
    CHECK(fwd.value(i, 0, 2) == doctest::Approx(2.0 / 3.0).epsilon(5e-3));
  }
}

TEST_CASE("a divergent update is rejected and leaves the parameters alone") {
  TrainConfig cfg = config_for(LossKind::mse);
  cfg.head_kind = HeadKind::none;
  cfg.lr = 1e18;  // guarantees overflow within a few steps
  CriticEnsemble ens = ensemble_for(cfg, 3);
  const auto batch = probe_batch();

  bool saw_divergence = false;
  std::vector<double> params_at_failure;
  // The blow-up compounds geometrically, so give it room to reach inf.
  for (int i = 0; i < 60 && !saw_divergence; ++i) {
    params_at_failure = ens.critic_params(0);
    const StepReport rep = train_step(ens, batch, cfg, 0.9);
    if (!rep.applied) {
      saw_divergence = true;
      CHECK_FALSE(rep.loss.finite());
      CHECK_FALSE(rep.loss.diverged.empty());
      CHECK(ens.critic_params(0) == params_at_failure);
    }
  }
  CHECK(saw_divergence);
}

// ---------------------------------------------------------------------------
// Experiment runs and their logs

namespace {

ExperimentConfig tiny_experiment(LossKind kind, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.env.n_states = 4;
  cfg.env.horizon = 25;
  cfg.env.reward_noise.kind = NoiseKind::laplace;
  cfg.env.reward_noise.scale = 1.0;
  cfg.env.seed = 7;
  cfg.agent.loss_kind = kind;
  cfg.agent.head_kind = default_head_kind(kind);
  cfg.agent.n_critics = 3;
  cfg.agent.hidden_dim = 8;
  cfg.agent.batch_size = 16;
  cfg.agent.target_refresh = 25;
  cfg.agent.weighting.xi.min_effective_batch = 8;
  cfg.agent.weighting.ensemble_size = 3;
  cfg.n_steps = 400;
  cfg.n_checkpoints = 4;
  cfg.td_snapshot_size = 64;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("run_experiment fills a complete log") {
  const ExperimentConfig cfg = tiny_experiment(LossKind::ggd_nll_biev, 11);
  const TrainRunLog log = run_experiment(cfg);
  CHECK(log.timeseries.size() == 4);
  CHECK(log.timeseries.back().step == 400);
  CHECK(log.beta_by_state.size() == 4);
  CHECK(log.variance_by_state.size() == 4);
  CHECK(log.snapshot_steps.size() == 4);
  for (const auto& snap : log.td_snapshots) CHECK(snap.size() == 64);
  for (const auto& betas : log.beta_by_state) {
    REQUIRE(betas.size() == 4);
    for (double b : betas) CHECK(b > 0.0);
  }
  for (const CheckpointRow& row : log.timeseries) {
    CHECK(std::isfinite(row.value_rmse));
  }
  CHECK_FALSE(log.meta_json.empty());

  // mse logs carry no head summaries.
  const TrainRunLog plain = run_experiment(tiny_experiment(LossKind::mse, 11));
  CHECK(plain.beta_by_state.empty());
  CHECK(plain.variance_by_state.empty());
  CHECK(std::isnan(plain.timeseries.back().cov_beta));
}

TEST_CASE("identical configs reproduce the log bit for bit") {
  const ExperimentConfig cfg = tiny_experiment(LossKind::ggd_nll_biev, 5);
  const TrainRunLog a = run_experiment(cfg);
  const TrainRunLog b = run_experiment(cfg);
  REQUIRE(a.timeseries.size() == b.timeseries.size());
  for (std::size_t i = 0; i < a.timeseries.size(); ++i) {
    CHECK(a.timeseries[i].mean_return == b.timeseries[i].mean_return);
    CHECK(a.timeseries[i].value_rmse == b.timeseries[i].value_rmse);
  }
  CHECK(a.td_snapshots == b.td_snapshots);
  CHECK(a.meta_json == b.meta_json);

  // A different seed must genuinely change the run.
  ExperimentConfig other = cfg;
  other.seed = 6;
  const TrainRunLog c = run_experiment(other);
  CHECK(a.timeseries.back().value_rmse != c.timeseries.back().value_rmse);
}

TEST_CASE("run logs round-trip through the directory format byte for byte") {
  const ExperimentConfig cfg = tiny_experiment(LossKind::ggd_nll_biev, 19);
  const TrainRunLog log = run_experiment(cfg);
  const fs::path dir = temp_dir("roundtrip");
  write_run_log(log, dir);

  CHECK(fs::exists(dir / "run.json"));
  CHECK(fs::exists(dir / "timeseries.csv"));

  const TrainRunLog back = read_run_log(dir);
  CHECK(back.meta_json == log.meta_json);
  CHECK(back.snapshot_steps == log.snapshot_steps);
  REQUIRE(back.timeseries.size() == log.timeseries.size());
  for (std::size_t i = 0; i < log.timeseries.size(); ++i) {
    CHECK(back.timeseries[i].step == log.timeseries[i].step);
    CHECK(back.timeseries[i].value_rmse == log.timeseries[i].value_rmse);
    CHECK(back.timeseries[i].cov_beta == log.timeseries[i].cov_beta);
  }
  REQUIRE(back.td_snapshots.size() == log.td_snapshots.size());
  for (std::size_t i = 0; i < log.td_snapshots.size(); ++i) {
    CHECK(back.td_snapshots[i] == log.td_snapshots[i]);
  }

  // Writing the reread log to a second directory yields identical bytes.
  const fs::path dir2 = temp_dir("roundtrip2");
  write_run_log(back, dir2);
  CHECK(slurp(dir / "timeseries.csv") == slurp(dir2 / "timeseries.csv"));
  CHECK(slurp(dir / "run.json") == slurp(dir2 / "run.json"));

  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("read_run_log rejects missing or mangled directories") {
  CHECK_THROWS_AS(read_run_log("/nonexistent/ggtde_run"), std::runtime_error);

  const ExperimentConfig cfg = tiny_experiment(LossKind::mse, 23);
  const TrainRunLog log = run_experiment(cfg);
  const fs::path dir = temp_dir("mangled");
  write_run_log(log, dir);
  {
    std::ofstream out(dir / "timeseries.csv", std::ios::trunc);
    out << "step,wrong,header\n1,2,3\n";
  }
  CHECK_THROWS_AS(read_run_log(dir), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("schema fingerprints group runs by everything except the seed") {
  const ExperimentConfig cfg_a = tiny_experiment(LossKind::ggd_nll_biev, 1);
  ExperimentConfig cfg_b = cfg_a;
  cfg_b.seed = 99;
  const TrainRunLog a = run_experiment(cfg_a);
  const TrainRunLog b = run_experiment(cfg_b);
  CHECK(schema_fingerprint(a) == schema_fingerprint(b));

  ExperimentConfig cfg_c = cfg_a;
  cfg_c.agent.loss_kind = LossKind::ggd_nll_only;
  const TrainRunLog c = run_experiment(cfg_c);
  CHECK(schema_fingerprint(a) != schema_fingerprint(c));

  // The env seed is a seed too; it must not split the group.
  ExperimentConfig cfg_d = cfg_a;
  cfg_d.env.seed = 1234;
  const TrainRunLog d = run_experiment(cfg_d);
  CHECK(schema_fingerprint(a) == schema_fingerprint(d));
}

TEST_CASE("experiment config JSON round-trips and rejects junk") {
  const ExperimentConfig cfg = tiny_experiment(LossKind::gaussian_nll_biv, 31);
  const ExperimentConfig back = ExperimentConfig::from_json_text(cfg.to_json_text());
  CHECK(back.to_json_text() == cfg.to_json_text());
  CHECK(back.agent.loss_kind == cfg.agent.loss_kind);
  CHECK(back.env.reward_noise.kind == cfg.env.reward_noise.kind);
  CHECK(back.seed == cfg.seed);

  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{\"agnet\": {}}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{\"agent\": {\"loss_kind\": \"huber\"}}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("not json"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("[]"), std::invalid_argument);
}
