#ifndef SPARSELQ_LOG_HPP
#define SPARSELQ_LOG_HPP

/**
 * @file
 * @brief Minimal leveled logging to stderr, controlled by SPARSELQ_LOG.
 *
 * SPARSELQ_LOG accepts error, warn, info, debug (or 0-3). Default: warn.
 */

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace sparselq::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level parse_level(std::string_view s)
{
  if (s == "error" || s == "0") { return Level::Error; }
  if (s == "info" || s == "2") { return Level::Info; }
  if (s == "debug" || s == "3") { return Level::Debug; }
  return Level::Warn;
}

inline Level & threshold()
{
  static Level level = [] {
    const char * env = std::getenv("SPARSELQ_LOG");
    return env ? parse_level(env) : Level::Warn;
  }();
  return level;
}

inline bool enabled(Level l) { return static_cast<int>(l) <= static_cast<int>(threshold()); }

inline void write(Level l, const std::string & msg)
{
  if (!enabled(l)) { return; }
  static std::mutex mtx;
  static constexpr const char * names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mtx);
  std::cerr << "[sparselq " << names[static_cast<int>(l)] << "] " << msg << '\n';
}

inline void error(const std::string & m) { write(Level::Error, m); }
inline void warn(const std::string & m) { write(Level::Warn, m); }
inline void info(const std::string & m) { write(Level::Info, m); }
inline void debug(const std::string & m) { write(Level::Debug, m); }

}  // namespace sparselq::log

#endif  // SPARSELQ_LOG_HPP
