#include "ggtde/run_log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ggtde {

namespace {

// Shortest exact decimal form; NaN normalized to a bare "nan" so the
// serialization is byte-stable.
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("run_log: cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("run_log: write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("run_log: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_double(const std::string& s, const std::filesystem::path& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("run_log: bad number '" + s + "' in " + where.string());
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

constexpr const char* kTimeseriesHeader = "step,mean_return,cov_beta,cov_variance,value_rmse";

}  // namespace

void write_run_log(const TrainRunLog& log, const std::filesystem::path& dir) {
  if (log.timeseries.empty()) throw std::runtime_error("run_log: nothing to write");
  std::filesystem::create_directories(dir);

  write_file(dir / "run.json", log.meta_json);

  std::string ts = std::string(kTimeseriesHeader) + "\n";
  for (const CheckpointRow& row : log.timeseries) {
    ts += std::to_string(row.step) + "," + fmt(row.mean_return) + "," + fmt(row.cov_beta) + "," +
          fmt(row.cov_variance) + "," + fmt(row.value_rmse) + "\n";
  }
  write_file(dir / "timeseries.csv", ts);

  for (std::size_t k = 0; k < log.snapshot_steps.size(); ++k) {
    std::string body = "delta\n";
    for (double d : log.td_snapshots[k]) body += fmt(d) + "\n";
    write_file(dir / ("td_errors_" + std::to_string(log.snapshot_steps[k]) + ".csv"), body);
  }
}

TrainRunLog read_run_log(const std::filesystem::path& dir) {
  TrainRunLog log;
  log.meta_json = read_file(dir / "run.json");

  // Round-trip the checkpoint arrays stashed in run.json.
  try {
    const nlohmann::json meta = nlohmann::json::parse(log.meta_json);
    if (meta.contains("checkpoints")) {
      const nlohmann::json& ck = meta["checkpoints"];
      if (ck.contains("beta_by_state")) {
        log.beta_by_state = ck["beta_by_state"].get<std::vector<std::vector<double>>>();
      }
      if (ck.contains("variance_by_state")) {
        log.variance_by_state = ck["variance_by_state"].get<std::vector<std::vector<double>>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("run_log: malformed run.json in " + dir.string() + ": " + e.what());
  }

  const std::filesystem::path ts_path = dir / "timeseries.csv";
  std::istringstream ts(read_file(ts_path));
  std::string line;
  if (!std::getline(ts, line) || line != kTimeseriesHeader) {
    throw std::runtime_error("run_log: unexpected timeseries header in " + ts_path.string());
  }
  while (std::getline(ts, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 5) {
      throw std::runtime_error("run_log: malformed row in " + ts_path.string());
    }
    CheckpointRow row;
    row.step = static_cast<std::size_t>(std::stoull(fields[0]));
    row.mean_return = parse_double(fields[1], ts_path);
    row.cov_beta = parse_double(fields[2], ts_path);
    row.cov_variance = parse_double(fields[3], ts_path);
    row.value_rmse = parse_double(fields[4], ts_path);
    log.timeseries.push_back(row);
  }
  if (log.timeseries.empty()) {
    throw std::runtime_error("run_log: empty timeseries in " + ts_path.string());
  }

  // TD snapshots, in checkpoint order.
  std::vector<std::pair<std::size_t, std::filesystem::path>> snaps;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("td_errors_", 0) == 0 && name.size() > 14 &&
        name.substr(name.size() - 4) == ".csv") {
      const std::string num = name.substr(10, name.size() - 14);
      try {
        snaps.emplace_back(static_cast<std::size_t>(std::stoull(num)), entry.path());
      } catch (const std::exception&) {
        throw std::runtime_error("run_log: unparseable snapshot name " + name);
      }
    }
  }
  std::sort(snaps.begin(), snaps.end());
  for (const auto& [step, path] : snaps) {
    std::istringstream body(read_file(path));
    if (!std::getline(body, line) || line != "delta") {
      throw std::runtime_error("run_log: unexpected snapshot header in " + path.string());
    }
    std::vector<double> deltas;
    while (std::getline(body, line)) {
      if (!line.empty()) deltas.push_back(parse_double(line, path));
    }
    log.snapshot_steps.push_back(step);
    log.td_snapshots.push_back(std::move(deltas));
  }
  return log;
}

std::string schema_fingerprint(const TrainRunLog& log) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(log.meta_json);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("run_log: malformed run.json: ") + e.what());
  }
  if (!meta.contains("config")) throw std::runtime_error("run_log: run.json has no config echo");
  nlohmann::json cfg = meta["config"];
  if (cfg.contains("run") && cfg["run"].is_object()) cfg["run"].erase("seed");
  if (cfg.contains("env") && cfg["env"].is_object()) cfg["env"].erase("seed");
  return cfg.dump();
}

}  // namespace ggtde
