#pragma once
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace seqrej {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level comes from SEQREJ_LOG (error|warn|info|debug); default warn.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("SEQREJ_LOG");
        if (!env) return LogLevel::Warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::Error;
        if (std::strcmp(env, "info") == 0) return LogLevel::Info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

template <typename... Args>
void log_at(LogLevel level, const char* tag, const char* fmt, Args... args) {
    if (level > log_level()) return;
    std::fprintf(stderr, "[%s] ", tag);
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
}

#define SEQREJ_WARN(...) ::seqrej::log_at(::seqrej::LogLevel::Warn, "warn", __VA_ARGS__)
#define SEQREJ_INFO(...) ::seqrej::log_at(::seqrej::LogLevel::Info, "info", __VA_ARGS__)
#define SEQREJ_DEBUG(...) ::seqrej::log_at(::seqrej::LogLevel::Debug, "debug", __VA_ARGS__)

} // namespace seqrej
