#pragma once

#include <string>

// Verbosity-gated stderr logging for the command line tool.  The level
// comes from the GGTDE_LOG environment variable: error, info (default),
// or debug.

namespace ggtde::cli {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace ggtde::cli
