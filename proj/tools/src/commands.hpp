#pragma once

#include <cstdint>
#include <string>
#include <vector>

// One entry point per subcommand.  Each returns the process exit code for
// the outcomes it owns (dominance violation -> 1, training divergence -> 4)
// and reports everything else by throwing:
//
//   std::invalid_argument, std::domain_error   bad input            -> 2
//   std::runtime_error                          numerical / IO error -> 3
//
// main() maps the exceptions to exit codes.

namespace ggtde::cli {

struct FitArgs {
  std::string input;
  std::string mode = "beta-only";
  std::string out;
  std::string hist;  // defaults to <out stem>_hist.csv
  int bins = 60;
};
int cmd_fit(const FitArgs& args);

struct DominanceArgs {
  double beta1 = 1.0;
  double beta2 = 2.0;
  double alpha = 1.0;
  int grid = 50;
  double tol = 1e-7;
  std::string out;  // empty: table goes to stdout
};
int cmd_dominance(const DominanceArgs& args);

struct EstimatorsArgs {
  std::string dist;  // "ggd:mu,alpha,beta"
  std::size_t n = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::string out;  // empty: JSON goes to stdout
};
int cmd_estimators(const EstimatorsArgs& args);

struct TrainArgs {
  std::string config;
  std::string out;
  bool has_seed = false;
  std::uint64_t seed = 0;
  bool force = false;
  std::vector<std::string> overrides;  // dot.path=json-value
};
int cmd_train(const TrainArgs& args);

struct AnalyzeArgs {
  std::vector<std::string> run_dirs;
  std::string out;
  bool force = false;
};
int cmd_analyze(const AnalyzeArgs& args);

}  // namespace ggtde::cli
