// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/log.hpp"

#include <iostream>
#include <mutex>

namespace cycpaint {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

LogSink& sink() {
  static LogSink s = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
  return s;
}

}  // namespace

LogSink set_warning_sink(LogSink s) {
  std::lock_guard lock(sink_mutex());
  LogSink prev = std::move(sink());
  sink() = std::move(s);
  return prev;
}

void warn(const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(message);
}

}  // namespace cycpaint
