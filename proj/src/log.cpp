#include "gg/log.hpp"

#include <iostream>
#include <mutex>

namespace gg::log {
namespace {

std::mutex g_mutex;

void stderr_sink(Level level, std::string_view message) {
  if (level == Level::Debug) return;
  std::cerr << '[' << level_name(level) << "] " << message << '\n';
}

Sink& current() {
  static Sink sink = stderr_sink;
  return sink;
}

}  // namespace

std::string_view level_name(Level level) {
  switch (level) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
  }
  return "?";
}

Sink set_sink(Sink sink) {
  std::lock_guard lock(g_mutex);
  Sink previous = std::move(current());
  current() = sink ? std::move(sink) : Sink(stderr_sink);
  return previous;
}

void write(Level level, std::string_view message) {
  std::lock_guard lock(g_mutex);
  current()(level, message);
}

}  // namespace gg::log
