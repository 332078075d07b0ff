#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace repex {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level comes from REPEX_LOG_LEVEL in {error, warn, info, debug}; default warn.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("REPEX_LOG_LEVEL");
        if (env == nullptr) return LogLevel::Warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::Error;
        if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
        if (std::strcmp(env, "info") == 0) return LogLevel::Info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log_message(LogLevel level, const std::string& message) {
    if (level > log_level()) return;
    const char* tag = level == LogLevel::Error  ? "error"
                      : level == LogLevel::Warn ? "warn"
                      : level == LogLevel::Info ? "info"
                                                : "debug";
    std::fprintf(stderr, "[%s] %s\n", tag, message.c_str());
}

inline void log_error(const std::string& m) { log_message(LogLevel::Error, m); }
inline void log_warn(const std::string& m) { log_message(LogLevel::Warn, m); }
inline void log_info(const std::string& m) { log_message(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log_message(LogLevel::Debug, m); }

}  // namespace repex
