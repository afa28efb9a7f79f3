#include "marblix/common.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace marblix {

namespace {

LogLevel parse_level(const char* s) {
  std::string v = s ? s : "";
  if (v == "debug") return LogLevel::Debug;
  if (v == "info") return LogLevel::Info;
  if (v == "warn" || v == "warning") return LogLevel::Warn;
  if (v == "error") return LogLevel::Error;
  return LogLevel::Info;
}

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
  }
  return "?";
}

std::mutex g_mutex;
LogLevel g_level = parse_level(std::getenv("MARBLIX_LOG"));
LogSink g_sink;

}  // namespace

LogLevel log_level() { return g_level; }

void set_log_level(LogLevel level) { g_level = level; }

void set_log_sink(LogSink sink) {
  std::lock_guard<std::mutex> lock(g_mutex);
  g_sink = std::move(sink);
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void log_message(LogLevel level, const std::string& msg) {
  if (level < g_level) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  if (g_sink) {
    g_sink(level, msg);
  } else {
    std::fprintf(stderr, "[%s] %s\n", level_tag(level), msg.c_str());
  }
}

}  // namespace marblix
