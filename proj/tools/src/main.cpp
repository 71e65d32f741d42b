#include <exception>
#include <stdexcept>

#include <CLI11.hpp>

#include "commands.hpp"
#include "log.hpp"

// Exit codes:
//   0  success
//   1  dominance violation detected on the requested grid
//   2  input error (bad flags, malformed files, invalid configuration)
//   3  numerical or IO failure
//   4  training divergence

int main(int argc, char** argv) {
  CLI::App app{"GGD modeling of temporal-difference errors: fitting, dominance "
               "checks, variance-estimator experiments, and a tabular-chain "
               "training lab."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ggtde 0.1.0");
  app.footer("Set GGTDE_LOG=error|info|debug to control stderr logging.");

  ggtde::cli::FitArgs fit_args;
  CLI::App* fit = app.add_subcommand(
      "fit", "Fit a zero-location GGD to a one-column CSV of TD errors");
  fit->add_option("--input", fit_args.input, "CSV with one value per row")
      ->required();
  fit->add_option("--mode", fit_args.mode, "beta-only or alpha-beta")
      ->capture_default_str();
  fit->add_option("--out", fit_args.out, "path of the JSON fit report")
      ->required();
  fit->add_option("--hist", fit_args.hist,
                  "histogram CSV path (default: <out stem>_hist.csv)");
  fit->add_option("--bins", fit_args.bins, "histogram bin count")
      ->capture_default_str();

  ggtde::cli::DominanceArgs dom_args;
  CLI::App* dom = app.add_subcommand(
      "dominance", "Tabulate the second-order dominance integral of two shapes");
  dom->add_option("--beta1", dom_args.beta1, "heavier-tailed shape")->required();
  dom->add_option("--beta2", dom_args.beta2, "lighter-tailed shape")->required();
  dom->add_option("--alpha", dom_args.alpha, "shared scale")
      ->capture_default_str();
  dom->add_option("--grid", dom_args.grid, "number of grid points")
      ->capture_default_str();
  dom->add_option("--tol", dom_args.tol, "violation tolerance")
      ->capture_default_str();
  dom->add_option("--out", dom_args.out, "CSV output path (default: stdout)");

  ggtde::cli::EstimatorsArgs est_args;
  CLI::App* est = app.add_subcommand(
      "estimators", "Monte Carlo comparison of variance estimators under a GGD");
  est->add_option("--dist", est_args.dist, "distribution spec 'ggd:mu,alpha,beta'")
      ->required();
  est->add_option("--n", est_args.n, "sample size per trial")->required();
  est->add_option("--trials", est_args.trials, "number of trials (at least 1000)")
      ->required();
  est->add_option("--seed", est_args.seed, "RNG seed")->capture_default_str();
  est->add_option("--out", est_args.out, "JSON output path (default: stdout)");

  ggtde::cli::TrainArgs train_args;
  CLI::App* train = app.add_subcommand(
      "train", "Run one TD-learning experiment from a JSON config");
  train->add_option("--config", train_args.config, "experiment config JSON")
      ->required();
  train->add_option("--out", train_args.out, "run directory to create")
      ->required();
  CLI::Option* seed_opt =
      train->add_option("--seed", train_args.seed, "override the run seed");
  train->add_flag("--force", train_args.force,
                  "overwrite a non-empty run directory");
  train
      ->add_option("--set", train_args.overrides,
                   "config override as dot.path=value (repeatable)")
      ->allow_extra_args(false);

  ggtde::cli::AnalyzeArgs an_args;
  CLI::App* an = app.add_subcommand(
      "analyze", "Aggregate run directories into a cross-seed report");
  an->add_option("run_dirs", an_args.run_dirs, "run directories to aggregate")
      ->required()
      ->expected(-1);
  an->add_option("--out", an_args.out, "report directory to create")->required();
  an->add_flag("--force", an_args.force, "overwrite a non-empty report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  train_args.has_seed = seed_opt->count() > 0;

  try {
    if (fit->parsed()) return ggtde::cli::cmd_fit(fit_args);
    if (dom->parsed()) return ggtde::cli::cmd_dominance(dom_args);
    if (est->parsed()) return ggtde::cli::cmd_estimators(est_args);
    if (train->parsed()) return ggtde::cli::cmd_train(train_args);
    if (an->parsed()) return ggtde::cli::cmd_analyze(an_args);
  } catch (const std::invalid_argument& e) {
    ggtde::cli::log_error(e.what());
    return 2;
  } catch (const std::domain_error& e) {
    ggtde::cli::log_error(e.what());
    return 2;
  } catch (const std::runtime_error& e) {
    ggtde::cli::log_error(e.what());
    return 3;
  } catch (const std::exception& e) {
    ggtde::cli::log_error(e.what());
    return 3;
  }
  return 0;
}
