#pragma once

#include <functional>
#include <string_view>

namespace attrsel {

using LogSink = std::function<void(std::string_view)>;

// Replaces the process-wide sink (default: stderr). Pass nullptr to silence.
void set_log_sink(LogSink sink);
void log_info(std::string_view message);

}  // namespace attrsel
