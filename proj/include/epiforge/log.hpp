#pragma once

#include <functional>
#include <string_view>

namespace epiforge {

// Warnings go to standard error unless a sink is installed (tests capture them).
using LogSink = std::function<void(std::string_view)>;

void set_log_sink(LogSink sink);
void log_warning(std::string_view message);

}  // namespace epiforge
