#pragma once

#include <string>

namespace waves::logging {

enum class Level : int { Error = 0, Info = 1, Debug = 2 };

/// Active level, initialized once from WAVE_LOG_LEVEL (error|info|debug,
/// default info). Unknown values fall back to info.
Level level();
void set_level(Level lv);

void error(const std::string& msg);
void info(const std::string& msg);
void debug(const std::string& msg);

} // namespace waves::logging
