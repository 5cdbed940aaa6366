#include "occhmm/diagnostics.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace occhmm {

namespace {

std::mutex g_mutex;

WarningSink& sink_ref() {
  static WarningSink sink = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}

}  // namespace

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(g_mutex);
  return std::exchange(sink_ref(), std::move(sink));
}

void warn(std::string_view message) {
  std::lock_guard lock(g_mutex);
  if (sink_ref()) sink_ref()(message);
}

}  // namespace occhmm
