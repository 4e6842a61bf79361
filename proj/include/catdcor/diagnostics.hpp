#pragma once

#include <functional>
#include <mutex>
#include <string_view>
#include <utility>

namespace catdcor {

using WarningHandler = std::function<void(std::string_view)>;

namespace detail {

struct WarningSink {
  std::mutex mutex;
  WarningHandler handler;
};

inline WarningSink& warning_sink() {
  static WarningSink sink;
  return sink;
}

}  // namespace detail

/// Installs the process-wide warning handler. Pass an empty function to
/// silence warnings (the default).
inline void set_warning_handler(WarningHandler handler) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mutex);
  sink.handler = std::move(handler);
}

inline void warn(std::string_view message) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mutex);
  if (sink.handler) sink.handler(message);
}

}  // namespace catdcor
