#include "waves/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace waves::logging {

namespace {

Level g_level = [] {
    const char* env = std::getenv("WAVE_LOG_LEVEL");
    if (env == nullptr) return Level::Info;
    if (std::strcmp(env, "error") == 0) return Level::Error;
    if (std::strcmp(env, "debug") == 0) return Level::Debug;
    return Level::Info;
}();

void emit(const char* tag, const std::string& msg) {
    std::fprintf(stderr, "[waves][%s] %s\n", tag, msg.c_str());
    std::fflush(stderr);
}

} // namespace

Level level() { return g_level; }
void set_level(Level lv) { g_level = lv; }

void error(const std::string& msg) { emit("error", msg); }

void info(const std::string& msg) {
    if (g_level >= Level::Info) emit("info", msg);
}

void debug(const std::string& msg) {
    if (g_level >= Level::Debug) emit("debug", msg);
}

} // namespace waves::logging
