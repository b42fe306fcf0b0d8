#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace gg::log {

enum class Level { Debug, Info, Warn, Error };

using Sink = std::function<void(Level, std::string_view)>;

/// Replaces the process-wide sink and returns the previous one. The default
/// sink writes "[warn] message" lines to stderr for Info and above.
Sink set_sink(Sink sink);

void write(Level level, std::string_view message);

inline void debug(std::string_view m) { write(Level::Debug, m); }
inline void info(std::string_view m) { write(Level::Info, m); }
inline void warn(std::string_view m) { write(Level::Warn, m); }
inline void error(std::string_view m) { write(Level::Error, m); }

std::string_view level_name(Level level);

}  // namespace gg::log
