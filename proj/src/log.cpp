#include "epiforge/log.hpp"

#include <iostream>
#include <mutex>

#include "epiforge/error.hpp"

namespace epiforge {

namespace {
std::mutex g_sink_mutex;
LogSink g_sink;
}  // namespace

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateProjection: return "DegenerateProjection";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::InsufficientInliers: return "InsufficientInliers";
    case ErrorKind::AmbiguousCheirality: return "AmbiguousCheirality";
    case ErrorKind::ParallelRays: return "ParallelRays";
    case ErrorKind::NoVisibleJoints: return "NoVisibleJoints";
    case ErrorKind::EmptyOverlap: return "EmptyOverlap";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

void set_log_sink(LogSink sink) {
  std::lock_guard lock(g_sink_mutex);
  g_sink = std::move(sink);
}

void log_warning(std::string_view message) {
  std::lock_guard lock(g_sink_mutex);
  if (g_sink) {
    g_sink(message);
    return;
  }
  std::cerr << "[epiforge] warning: " << message << '\n';
}

}  // namespace epiforge
