#include <benchmark/benchmark.h>

#include <vector>

#include "ggtde/critic_ensemble.hpp"
#include "ggtde/estimators.hpp"
#include "ggtde/ggd.hpp"
#include "ggtde/rng.hpp"
#include "ggtde/special_math.hpp"
#include "ggtde/train.hpp"
#include "ggtde/weighting.hpp"

namespace {

using namespace ggtde;

// ---------------------------------------------------------------------------
// Scalar special functions.

void BM_LogGamma(benchmark::State& state) {
  double x = 0.11;
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_gamma(x));
    x = x < 90.0 ? x + 1.37 : 0.11;
  }
}
BENCHMARK(BM_LogGamma);

void BM_RegLowerIncGamma(benchmark::State& state) {
  double s = 0.05;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reg_lower_inc_gamma(1.25, s));
    s = s < 30.0 ? s + 0.61 : 0.05;
  }
}
BENCHMARK(BM_RegLowerIncGamma);

void BM_Digamma(benchmark::State& state) {
  double x = 0.07;
  for (auto _ : state) {
    benchmark::DoNotOptimize(digamma(x));
    x = x < 50.0 ? x + 0.93 : 0.07;
  }
}
BENCHMARK(BM_Digamma);

// ---------------------------------------------------------------------------
// Density, loss, and gradient kernels.

void BM_Pdf(benchmark::State& state) {
  const GGDParams p{0.0, 1.2, 1.4};
  double x = -6.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pdf(x, p));
    x = x < 6.0 ? x + 0.173 : -6.0;
  }
}
BENCHMARK(BM_Pdf);

void BM_Cdf(benchmark::State& state) {
  const GGDParams p{0.0, 1.2, 1.4};
  double x = -6.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cdf(x, p));
    x = x < 6.0 ? x + 0.173 : -6.0;
  }
}
BENCHMARK(BM_Cdf);

void BM_NllGrad(benchmark::State& state) {
  const NllForm form = state.range(0) ? NllForm::modified : NllForm::exact;
  const GGDParams p{0.0, 0.9, 1.3};
  double d = -4.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(nll_grad(d, p, form));
    d = d < 4.0 ? d + 0.21 : -4.0;
  }
}
BENCHMARK(BM_NllGrad)->Arg(0)->Arg(1)->ArgName("modified");

void BM_SampleDraws(benchmark::State& state) {
  const GGDParams p{0.0, 1.0, 0.8};
  Rng rng(42);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_one(p, rng));
  }
}
BENCHMARK(BM_SampleDraws);

void BM_FitMle(benchmark::State& state) {
  const auto xs = sample({0.0, 1.0, 1.3}, static_cast<std::size_t>(state.range(0)), 7);
  const FitMode mode = state.range(1) ? FitMode::alpha_beta : FitMode::beta_only;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_mle(xs, mode));
  }
}
BENCHMARK(BM_FitMle)->Args({1000, 0})->Args({10000, 0})->Args({1000, 1})->Args({10000, 1});

// ---------------------------------------------------------------------------
// Batch weighting.

TDErrorBatch weighting_batch(std::size_t n) {
  TDErrorBatch b;
  Rng rng(99);
  for (std::size_t i = 0; i < n; ++i) {
    b.deltas.push_back(3.0 * rng.normal());
    b.ensemble_value_variance.push_back(std::exp(rng.normal()));
    b.ensemble_error_variance.push_back(std::exp(rng.normal()));
    b.betas.push_back(0.6 + 1.6 * rng.uniform());
    b.alphas.push_back(1.0);
  }
  return b;
}

void BM_SolveXi(benchmark::State& state) {
  const TDErrorBatch b = weighting_batch(64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_xi(b.ensemble_error_variance, 16));
  }
}
BENCHMARK(BM_SolveXi);

void BM_CompositeLoss(benchmark::State& state) {
  const TDErrorBatch b = weighting_batch(static_cast<std::size_t>(state.range(0)));
  WeightingConfig cfg;
  cfg.xi.min_effective_batch = static_cast<std::size_t>(state.range(0)) / 4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(composite_loss(b, cfg, NllForm::modified));
  }
}
BENCHMARK(BM_CompositeLoss)->Arg(32)->Arg(256);

// ---------------------------------------------------------------------------
// One full training step: forward passes, weights, backprop, update.

void BM_TrainStep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.loss_kind = state.range(0) ? LossKind::ggd_nll_biev : LossKind::gaussian_nll_biv;
  cfg.head_kind = default_head_kind(cfg.loss_kind);
  cfg.batch_size = 32;

  CriticConfig ccfg;
  ccfg.n_critics = cfg.n_critics;
  ccfg.feature_dim = 10;
  ccfg.n_actions = 2;
  ccfg.hidden_dim = cfg.hidden_dim;
  ccfg.head_kind = cfg.head_kind;
  ccfg.seed = 5;
  CriticEnsemble ens(ccfg);

  Rng rng(17);
  std::vector<Transition> batch;
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    Transition t;
    t.state = rng.uniform_index(10);
    t.action = rng.uniform_index(2);
    t.reward = 2.0 * rng.normal();
    t.next_state = rng.uniform_index(10);
    t.next_action = rng.uniform_index(2);
    batch.push_back(t);
  }

  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(ens, batch, cfg, 0.95));
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->ArgName("shape_aware");

}  // namespace

BENCHMARK_MAIN();
