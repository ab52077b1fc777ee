#include "orbitgraph/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace orbitgraph {
namespace {

LogLevel parse_env() {
    const char* env = std::getenv("ORBITGRAPH_LOG");
    if (env == nullptr) return LogLevel::Warn;
    const std::string v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
}

std::atomic<int>& threshold() {
    static std::atomic<int> level{static_cast<int>(parse_env())};
    return level;
}

constexpr const char* kNames[] = {"error", "warn", "info", "debug"};

} // namespace

LogLevel log_threshold() { return static_cast<LogLevel>(threshold().load()); }

void set_log_threshold(LogLevel level) { threshold().store(static_cast<int>(level)); }

void log(LogLevel level, std::string_view message) {
    if (static_cast<int>(level) > threshold().load()) return;
    static std::mutex mu;
    std::lock_guard lock(mu);
    std::cerr << "[orbitgraph " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

} // namespace orbitgraph
