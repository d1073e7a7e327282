#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace tastr::log {

enum class Level : int { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Level comes from the TASTR_LOG environment variable (debug|info|warn|error|off).
// Default is warn so library users and tests stay quiet; the CLI bumps it to info.
inline Level& threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("TASTR_LOG");
        if (env == nullptr) return Level::Warn;
        if (std::strcmp(env, "debug") == 0) return Level::Debug;
        if (std::strcmp(env, "info") == 0) return Level::Info;
        if (std::strcmp(env, "warn") == 0) return Level::Warn;
        if (std::strcmp(env, "error") == 0) return Level::Error;
        if (std::strcmp(env, "off") == 0) return Level::Off;
        return Level::Warn;
    }();
    return lvl;
}

inline bool env_has_level() { return std::getenv("TASTR_LOG") != nullptr; }

inline bool enabled(Level lvl) {
    return static_cast<int>(lvl) >= static_cast<int>(threshold());
}

inline void write(Level lvl, const char* tag, const char* fmt, std::va_list args) {
    if (static_cast<int>(lvl) < static_cast<int>(threshold())) return;
    std::fprintf(stderr, "[%s] ", tag);
    std::vfprintf(stderr, fmt, args);
    std::fputc('\n', stderr);
}

inline void debug(const char* fmt, ...) {
    std::va_list args;
    va_start(args, fmt);
    write(Level::Debug, "debug", fmt, args);
    va_end(args);
}

inline void info(const char* fmt, ...) {
    std::va_list args;
    va_start(args, fmt);
    write(Level::Info, "info", fmt, args);
    va_end(args);
}

inline void warn(const char* fmt, ...) {
    std::va_list args;
    va_start(args, fmt);
    write(Level::Warn, "warn", fmt, args);
    va_end(args);
}

inline void error(const char* fmt, ...) {
    std::va_list args;
    va_start(args, fmt);
    write(Level::Error, "error", fmt, args);
    va_end(args);
}

}  // namespace tastr::log
