#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

// On-disk format of one training run: a directory holding
//
//   run.json             config echo, seed, final summary, checkpoint arrays
//   timeseries.csv       step, mean_return, cov_beta, cov_variance, value_rmse
//   td_errors_<step>.csv TD-error snapshot drawn at that checkpoint
//
// Writing is deterministic: identical logs serialize to identical bytes.

namespace ggtde {

struct CheckpointRow {
  std::size_t step = 0;
  double mean_return = 0.0;  // mean episodic return since the previous checkpoint
  double cov_beta = 0.0;     // coefficient of variation of beta across states
  double cov_variance = 0.0;
  double value_rmse = 0.0;   // against the exact model oracle
};

struct TrainRunLog {
  std::vector<CheckpointRow> timeseries;

  // Per-checkpoint per-state head summaries; empty when the head kind
  // does not produce them.
  std::vector<std::vector<double>> beta_by_state;
  std::vector<std::vector<double>> variance_by_state;

  // TD-error snapshots, one per checkpoint.
  std::vector<std::size_t> snapshot_steps;
  std::vector<std::vector<double>> td_snapshots;

  // The full run.json document.
  std::string meta_json;
};

// Creates dir (and parents) and writes the three file kinds above.
void write_run_log(const TrainRunLog& log, const std::filesystem::path& dir);

// Reads a directory written by write_run_log; throws std::runtime_error on
// missing or malformed files.
TrainRunLog read_run_log(const std::filesystem::path& dir);

// Identifies the experiment a log belongs to: the config echo from
// run.json with every seed field removed.  Runs that differ only by seed
// share a fingerprint; anything else (loss, env, schedule) does not.
std::string schema_fingerprint(const TrainRunLog& log);

}  // namespace ggtde
