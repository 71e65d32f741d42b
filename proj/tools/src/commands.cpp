#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ggtde/estimators.hpp"
#include "ggtde/ggd.hpp"
#include "ggtde/rng.hpp"
#include "ggtde/run_log.hpp"
#include "ggtde/train.hpp"
#include "log.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ggtde::cli {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Round-trip safe number formatting shared by every CSV this tool writes.
std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::invalid_argument("cannot open '" + path.string() + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  out << content;
  if (!out) {
    throw std::runtime_error("short write to '" + path.string() + "'");
  }
}

// Refuses to clobber a non-empty directory unless forced.
void prepare_out_dir(const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec) && fs::is_directory(dir, ec) &&
      !fs::is_empty(dir, ec) && !force) {
    throw std::invalid_argument("output directory '" + dir.string() +
                                "' is not empty (pass --force to overwrite)");
  }
  fs::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create directory '" + dir.string() +
                             "': " + ec.message());
  }
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n == 0) return kNan;
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Sample standard deviation across runs; a single value has spread zero
// by convention so one-run reports stay well defined.
double sd_of(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n == 0) return kNan;
  if (n == 1) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r')) {
      ++pos;
    }
    if (pos != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(what + ": cannot parse '" + text +
                                "' as a number");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

int cmd_fit(const FitArgs& args) {
  if (args.bins < 4 || args.bins > 2000) {
    throw std::invalid_argument("--bins must be in [4, 2000]");
  }
  FitMode mode;
  if (args.mode == "beta-only" || args.mode == "beta_only") {
    mode = FitMode::beta_only;
  } else if (args.mode == "alpha-beta" || args.mode == "alpha_beta") {
    mode = FitMode::alpha_beta;
  } else {
    throw std::invalid_argument("--mode must be 'beta-only' or 'alpha-beta', got '" +
                                args.mode + "'");
  }

  // One numeric column, one value per row, optional header line.
  const std::string text = slurp(args.input);
  std::vector<double> samples;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      try {
        samples.push_back(parse_double(line, "line 1"));
      } catch (const std::invalid_argument&) {
        // Header line.
      }
      continue;
    }
    samples.push_back(
        parse_double(line, "line " + std::to_string(line_no) + " of '" +
                               args.input + "'"));
  }
  if (samples.size() < 10) {
    throw std::invalid_argument("'" + args.input + "' holds " +
                                std::to_string(samples.size()) +
                                " samples; the fit needs at least 10");
  }
  log_debug("read " + std::to_string(samples.size()) + " samples from '" +
            args.input + "'");

  const FitResult fit = fit_mle(samples, mode);

  // Moment summary and the Gaussian ML fit used for the overlay curve.
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  double var_ml = 0.0;
  for (double x : samples) var_ml += (x - mean) * (x - mean);
  var_ml /= static_cast<double>(samples.size());

  // Histogram with fitted GGD and Gaussian density overlays.
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi <= lo) {
    const double pad = std::max(0.5, std::fabs(lo) * 0.1);
    lo -= pad;
    hi += pad;
  }
  const int bins = args.bins;
  const double width = (hi - lo) / bins;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (double x : samples) {
    auto idx = static_cast<std::size_t>((x - lo) / width);
    if (idx >= counts.size()) idx = counts.size() - 1;
    ++counts[idx];
  }
  std::string hist_csv =
      "bin_left,bin_right,empirical_density,ggd_density,gaussian_density\n";
  const double inv_mass = 1.0 / (static_cast<double>(samples.size()) * width);
  for (int b = 0; b < bins; ++b) {
    const double left = lo + b * width;
    const double right = lo + (b + 1) * width;
    const double center = 0.5 * (left + right);
    const double empirical = static_cast<double>(counts[static_cast<std::size_t>(b)]) * inv_mass;
    const double ggd_density = pdf(center, fit.params);
    const double gaussian_density =
        var_ml > 0.0 ? std::exp(-0.5 * (center - mean) * (center - mean) / var_ml) /
                           std::sqrt(2.0 * 3.14159265358979323846 * var_ml)
                     : kNan;
    hist_csv += fmt17(left) + "," + fmt17(right) + "," + fmt17(empirical) + "," +
                fmt17(ggd_density) + "," + fmt17(gaussian_density) + "\n";
  }

  fs::path hist_path;
  if (!args.hist.empty()) {
    hist_path = args.hist;
  } else {
    hist_path = args.out;
    hist_path.replace_extension();
    hist_path += "_hist.csv";
  }

  json report = {
      {"mode", mode == FitMode::beta_only ? "beta_only" : "alpha_beta"},
      {"n_samples", samples.size()},
      {"params",
       {{"mu", fit.params.mu}, {"alpha", fit.params.alpha}, {"beta", fit.params.beta}}},
      {"nll_at_optimum", fit.nll_at_optimum},
      {"iterations", fit.iterations},
      {"converged", fit.converged},
      {"sample_mean", mean},
      {"sample_variance_ml", var_ml},
      {"histogram_csv", hist_path.string()},
  };

  spill(args.out, report.dump(2) + "\n");
  spill(hist_path, hist_csv);
  log_info("wrote '" + args.out + "' and '" + hist_path.string() + "'");

  std::printf("fitted beta=%.6g alpha=%.6g nll=%.6g converged=%s\n",
              fit.params.beta, fit.params.alpha, fit.nll_at_optimum,
              fit.converged ? "true" : "false");
  return 0;
}

// ---------------------------------------------------------------------------
// dominance
// ---------------------------------------------------------------------------

int cmd_dominance(const DominanceArgs& args) {
  if (!(std::isfinite(args.beta1) && args.beta1 > 0.0) ||
      !(std::isfinite(args.beta2) && args.beta2 > 0.0)) {
    throw std::invalid_argument("--beta1 and --beta2 must be positive");
  }
  if (!(std::isfinite(args.alpha) && args.alpha > 0.0)) {
    throw std::invalid_argument("--alpha must be positive");
  }
  if (args.grid < 2) throw std::invalid_argument("--grid must be at least 2");
  if (!(args.tol >= 0.0)) throw std::invalid_argument("--tol must be nonnegative");

  // Cover +/- 4 standard deviations of the wider of the two distributions.
  const double sd1 = std::sqrt(variance({0.0, args.alpha, args.beta1}));
  const double sd2 = std::sqrt(variance({0.0, args.alpha, args.beta2}));
  const double span = 4.0 * std::max(sd1, sd2);

  std::string table = "x,ssd_integral\n";
  double min_val = std::numeric_limits<double>::infinity();
  double min_x = 0.0;
  for (int i = 0; i < args.grid; ++i) {
    const double x = -span + 2.0 * span * i / (args.grid - 1);
    const double v = ssd_integral(args.beta1, args.beta2, args.alpha, x);
    if (v < min_val) {
      min_val = v;
      min_x = x;
    }
    table += fmt17(x) + "," + fmt17(v) + "\n";
  }

  if (args.out.empty()) {
    std::fputs(table.c_str(), stdout);
  } else {
    spill(args.out, table);
    log_info("wrote '" + args.out + "'");
  }

  const bool violated = min_val < -args.tol;
  if (violated) {
    log_error("dominance violated: integral " + fmt17(min_val) + " at x=" +
              fmt17(min_x) + " is below -tol for beta1=" + fmt17(args.beta1) +
              " beta2=" + fmt17(args.beta2));
    return 1;
  }
  log_info("dominance holds on the grid (minimum integral " + fmt17(min_val) +
           " at x=" + fmt17(min_x) + ")");
  return 0;
}

// ---------------------------------------------------------------------------
// estimators
// ---------------------------------------------------------------------------

int cmd_estimators(const EstimatorsArgs& args) {
  constexpr const char* kPrefix = "ggd:";
  if (args.dist.rfind(kPrefix, 0) != 0) {
    throw std::invalid_argument("--dist must look like 'ggd:mu,alpha,beta'");
  }
  std::vector<double> parts;
  std::istringstream fields(args.dist.substr(4));
  std::string field;
  while (std::getline(fields, field, ',')) {
    parts.push_back(parse_double(field, "--dist"));
  }
  if (parts.size() != 3) {
    throw std::invalid_argument("--dist needs exactly three values: mu,alpha,beta");
  }
  const GGDParams dist{parts[0], parts[1], parts[2]};
  validate_params(dist);
  if (args.n < 4) {
    throw std::invalid_argument("--n must be at least 4");
  }
  if (args.trials < 1000) {
    throw std::invalid_argument(
        "--trials must be at least 1000 for a stable Monte Carlo comparison");
  }

  log_info("running variance-spread and corrected-estimator experiments (n=" +
           std::to_string(args.n) + ", trials=" + std::to_string(args.trials) + ")");
  const Prop1Result spread =
      prop1_bias_experiment(dist, args.n, args.trials, args.seed);
  const MbbeResult corrected =
      mbbe_optimality_experiment(dist, args.n, args.trials, mix_seed(args.seed, 1));

  const json doc = {
      {"dist", {{"mu", dist.mu}, {"alpha", dist.alpha}, {"beta", dist.beta}}},
      {"n", args.n},
      {"trials", args.trials},
      {"seed", args.seed},
      {"variance_spread",
       {{"true_variance", spread.true_variance},
        {"population_kurtosis", spread.population_kurtosis},
        {"mean_bias_of_mle_variance", spread.mean_bias_of_mle_variance},
        {"empirical_sd", spread.empirical_sd},
        {"normality_se", spread.normality_se},
        {"ratio", spread.ratio},
        {"predicted_ratio", spread.predicted_ratio},
        {"sign_matches_kurtosis", spread.sign_matches_kurtosis}}},
      {"corrected_estimator",
       {{"true_variance", corrected.true_variance},
        {"population_kurtosis", corrected.population_kurtosis},
        {"mse_sample_variance", corrected.mse_sample_variance},
        {"mse_mbbe", corrected.mse_mbbe},
        {"empirical_re", corrected.empirical_re},
        {"formula_re", corrected.formula_re}}},
  };

  const std::string out_text = doc.dump(2) + "\n";
  if (args.out.empty()) {
    std::fputs(out_text.c_str(), stdout);
  } else {
    spill(args.out, out_text);
    log_info("wrote '" + args.out + "'");
    std::printf("sd_ratio=%.6g predicted=%.6g empirical_re=%.6g formula_re=%.6g\n",
                spread.ratio, spread.predicted_ratio, corrected.empirical_re,
                corrected.formula_re);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

// Applies one "dot.path=value" override onto the raw config document.  The
// value is parsed as JSON when possible so numbers and booleans keep their
// type; anything unparsable is kept as a string.
void apply_override(json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("--set expects key.path=value, got '" + spec + "'");
  }
  const std::string path = spec.substr(0, eq);
  const std::string raw_value = spec.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw_value);
  } catch (const json::exception&) {
    value = raw_value;
  }

  json* cursor = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) {
      throw std::invalid_argument("--set path '" + path + "' has an empty segment");
    }
    if (!cursor->is_object()) {
      throw std::invalid_argument("--set path '" + path +
                                  "' descends into a non-object value");
    }
    if (dot == std::string::npos) {
      (*cursor)[key] = value;
      return;
    }
    cursor = &(*cursor)[key];
    start = dot + 1;
  }
}

}  // namespace

int cmd_train(const TrainArgs& args) {
  json doc;
  try {
    doc = json::parse(slurp(args.config));
  } catch (const json::exception& e) {
    throw std::invalid_argument("config '" + args.config +
                                "' is not valid JSON: " + std::string(e.what()));
  }
  for (const std::string& spec : args.overrides) {
    apply_override(doc, spec);
    log_debug("override applied: " + spec);
  }
  if (args.has_seed) {
    if (!doc.is_object() || !doc.contains("run") || !doc["run"].is_object()) {
      throw std::invalid_argument("config has no 'run' object to seed");
    }
    doc["run"]["seed"] = args.seed;
  }
  const ExperimentConfig cfg = ExperimentConfig::from_json_text(doc.dump());

  prepare_out_dir(args.out, args.force);

  log_info("training: " + std::to_string(cfg.n_steps) + " steps, seed " +
           std::to_string(cfg.seed));
  const TrainRunLog log = run_experiment(cfg);
  write_run_log(log, args.out);
  log_info("wrote run directory '" + args.out + "'");

  // Divergence: the value estimate left the plausible range or went
  // non-finite at some checkpoint.  The log is still written above so the
  // trajectory can be inspected.
  bool diverged = log.timeseries.empty();
  for (const CheckpointRow& row : log.timeseries) {
    if (!std::isfinite(row.value_rmse)) diverged = true;
  }
  if (!log.timeseries.empty() && log.timeseries.back().value_rmse > 1e8) {
    diverged = true;
  }
  if (diverged) {
    log_error("training diverged; checkpoint value RMSE trajectory:");
    const std::size_t first =
        log.timeseries.size() > 5 ? log.timeseries.size() - 5 : 0;
    for (std::size_t i = first; i < log.timeseries.size(); ++i) {
      log_error("  step " + std::to_string(log.timeseries[i].step) +
                ": value_rmse=" + fmt17(log.timeseries[i].value_rmse));
    }
    log_error("  (lr=" + fmt17(cfg.agent.lr) +
              ", batch_size=" + std::to_string(cfg.agent.batch_size) + ")");
    return 4;
  }

  const json meta = json::parse(log.meta_json);
  const json& final = meta.at("final");
  const auto num_or_nan = [&](const char* key) {
    return final.contains(key) && final[key].is_number()
               ? final[key].get<double>()
               : kNan;
  };
  std::printf("final_mean_return=%.6g\n", num_or_nan("mean_return"));
  std::printf("final_value_rmse=%.6g\n", num_or_nan("value_rmse"));
  std::printf("fitted_beta=%.6g\n", num_or_nan("fitted_beta"));
  return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(const AnalyzeArgs& args) {
  std::vector<TrainRunLog> logs;
  logs.reserve(args.run_dirs.size());
  for (const std::string& dir : args.run_dirs) {
    try {
      logs.push_back(read_run_log(dir));
    } catch (const std::runtime_error& e) {
      throw std::invalid_argument("run directory '" + dir +
                                  "': " + std::string(e.what()));
    }
  }

  // Every run must describe the same experiment (seeds aside) over the
  // same checkpoint schedule before aggregation makes sense.
  const std::string fingerprint = schema_fingerprint(logs[0]);
  std::vector<std::string> offenders;
  for (std::size_t i = 1; i < logs.size(); ++i) {
    if (schema_fingerprint(logs[i]) != fingerprint) {
      offenders.push_back(args.run_dirs[i]);
    }
  }
  if (!offenders.empty()) {
    log_error("run schema mismatch against '" + args.run_dirs[0] + "':");
    for (const std::string& dir : offenders) log_error("  " + dir);
    return 2;
  }
  for (std::size_t i = 1; i < logs.size(); ++i) {
    bool same = logs[i].timeseries.size() == logs[0].timeseries.size();
    for (std::size_t r = 0; same && r < logs[0].timeseries.size(); ++r) {
      same = logs[i].timeseries[r].step == logs[0].timeseries[r].step;
    }
    if (!same) offenders.push_back(args.run_dirs[i]);
  }
  if (!offenders.empty()) {
    log_error("checkpoint schedule mismatch against '" + args.run_dirs[0] + "':");
    for (const std::string& dir : offenders) log_error("  " + dir);
    return 2;
  }

  prepare_out_dir(args.out, args.force);
  const fs::path out_dir(args.out);
  const std::size_t n_steps = logs[0].timeseries.size();

  struct Metric {
    const char* name;
    double CheckpointRow::* field;
  };
  const Metric metrics[] = {
      {"mean_return", &CheckpointRow::mean_return},
      {"cov_beta", &CheckpointRow::cov_beta},
      {"cov_variance", &CheckpointRow::cov_variance},
      {"value_rmse", &CheckpointRow::value_rmse},
  };

  // Per-step median and spread across runs, over finite values only.
  std::vector<double> steps(n_steps);
  for (std::size_t r = 0; r < n_steps; ++r) {
    steps[r] = static_cast<double>(logs[0].timeseries[r].step);
  }
  std::vector<std::vector<double>> medians(4, std::vector<double>(n_steps, kNan));
  std::vector<std::vector<double>> sds(4, std::vector<double>(n_steps, kNan));
  for (std::size_t m = 0; m < 4; ++m) {
    for (std::size_t r = 0; r < n_steps; ++r) {
      std::vector<double> finite;
      for (const TrainRunLog& log : logs) {
        const double v = log.timeseries[r].*metrics[m].field;
        if (std::isfinite(v)) finite.push_back(v);
      }
      if (!finite.empty()) {
        medians[m][r] = median_of(finite);
        sds[m][r] = sd_of(finite);
      }
    }
  }

  std::string summary =
      "step,mean_return_median,mean_return_sd,cov_beta_median,cov_beta_sd,"
      "cov_variance_median,cov_variance_sd,value_rmse_median,value_rmse_sd\n";
  for (std::size_t r = 0; r < n_steps; ++r) {
    summary += std::to_string(logs[0].timeseries[r].step);
    for (std::size_t m = 0; m < 4; ++m) {
      summary += "," + fmt17(medians[m][r]) + "," + fmt17(sds[m][r]);
    }
    summary += "\n";
  }
  spill(out_dir / "summary.csv", summary);

  // Final-checkpoint comparison across runs, one row per run directory.
  std::string comparison =
      "run,final_mean_return,final_cov_beta,final_cov_variance,final_value_rmse,"
      "fitted_beta\n";
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const CheckpointRow& last = logs[i].timeseries.back();
    double fitted_beta = kNan;
    try {
      const json meta = json::parse(logs[i].meta_json);
      if (meta.contains("final") && meta["final"].contains("fitted_beta") &&
          meta["final"]["fitted_beta"].is_number()) {
        fitted_beta = meta["final"]["fitted_beta"].get<double>();
      }
    } catch (const json::exception&) {
      // Leave the field empty; read_run_log already validated the file.
    }
    comparison += csv_escape(args.run_dirs[i]) + "," + fmt17(last.mean_return) +
                  "," + fmt17(last.cov_beta) + "," + fmt17(last.cov_variance) +
                  "," + fmt17(last.value_rmse) + "," + fmt17(fitted_beta) + "\n";
  }
  spill(out_dir / "cov_comparison.csv", comparison);

  for (std::size_t m = 0; m < 4; ++m) {
    const std::string svg = line_chart_svg(std::string(metrics[m].name) +
                                               " (median of " +
                                               std::to_string(logs.size()) +
                                               (logs.size() == 1 ? " run)" : " runs)"),
                                           steps, medians[m], sds[m]);
    spill(out_dir / (std::string(metrics[m].name) + ".svg"), svg);
  }
  log_info("wrote summary.csv, cov_comparison.csv and 4 charts to '" + args.out +
           "'");

  std::printf("%-14s %16s %16s\n", "metric", "final_median", "final_sd");
  for (std::size_t m = 0; m < 4; ++m) {
    std::printf("%-14s %16.6g %16.6g\n", metrics[m].name,
                medians[m][n_steps - 1], sds[m][n_steps - 1]);
  }
  return 0;
}

}  // namespace ggtde::cli
