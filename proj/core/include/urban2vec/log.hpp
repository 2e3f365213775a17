#pragma once

#include <functional>
#include <string>

namespace urban2vec {

enum class LogLevel { kInfo, kWarning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Installs a process-wide sink; passing an empty function restores the
// default (warnings to stderr, info suppressed). Returns the previous sink.
LogSink set_log_sink(LogSink sink);

void log_info(const std::string& message);
void log_warning(const std::string& message);

}  // namespace urban2vec
