#include "nnlm/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace nnlm {
namespace {
std::atomic<LogLevel> g_level{LogLevel::warn};
std::mutex g_mutex;

void emit(const char* tag, std::string_view msg) {
  std::lock_guard lock(g_mutex);
  std::fprintf(stderr, "[%s] %.*s\n", tag, static_cast<int>(msg.size()), msg.data());
}
}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log_warn(std::string_view msg) {
  if (g_level >= LogLevel::warn) emit("warn", msg);
}

void log_info(std::string_view msg) {
  if (g_level >= LogLevel::info) emit("info", msg);
}

}  // namespace nnlm
