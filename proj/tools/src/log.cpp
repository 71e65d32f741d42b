#include "log.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

namespace ggtde::cli {

namespace {

LogLevel parse_level() {
  const char* raw = std::getenv("GGTDE_LOG");
  if (raw == nullptr) return LogLevel::info;
  const std::string value(raw);
  if (value == "error") return LogLevel::error;
  if (value == "info") return LogLevel::info;
  if (value == "debug") return LogLevel::debug;
  std::fprintf(stderr, "[warn] unknown GGTDE_LOG value '%s'; using 'info'\n",
               value.c_str());
  return LogLevel::info;
}

}  // namespace

LogLevel log_level() {
  static const LogLevel level = parse_level();
  return level;
}

void log_error(const std::string& msg) {
  std::fprintf(stderr, "[error] %s\n", msg.c_str());
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) {
    std::fprintf(stderr, "[info] %s\n", msg.c_str());
  }
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) {
    std::fprintf(stderr, "[debug] %s\n", msg.c_str());
  }
}

}  // namespace ggtde::cli
