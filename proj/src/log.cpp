#include "attrsel/log.hpp"

#include <iostream>
#include <mutex>

namespace attrsel {
namespace {

std::mutex g_mutex;
LogSink g_sink = [](std::string_view msg) { std::clog << "[attrsel] " << msg << '\n'; };

}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

void log_info(std::string_view message) {
  std::lock_guard lock(g_mutex);
  if (g_sink) g_sink(message);
}

}  // namespace attrsel
