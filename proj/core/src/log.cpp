#include "ordgam/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace ordgam::log {

namespace {

Level parse_env() {
  const char* env = std::getenv("ORDGAM_LOG");
  if (!env) return Level::warn;
  if (std::strcmp(env, "error") == 0 || std::strcmp(env, "0") == 0) return Level::error;
  if (std::strcmp(env, "warn") == 0 || std::strcmp(env, "1") == 0) return Level::warn;
  if (std::strcmp(env, "info") == 0 || std::strcmp(env, "2") == 0) return Level::info;
  if (std::strcmp(env, "debug") == 0 || std::strcmp(env, "3") == 0) return Level::debug;
  return Level::warn;
}

Level& threshold_ref() {
  static Level lvl = parse_env();
  return lvl;
}

std::mutex& out_mutex() {
  static std::mutex m;
  return m;
}

const char* tag(Level lvl) {
  switch (lvl) {
    case Level::error: return "error";
    case Level::warn: return "warn";
    case Level::info: return "info";
    default: return "debug";
  }
}

}  // namespace

Level threshold() { return threshold_ref(); }

void set_threshold(Level lvl) { threshold_ref() = lvl; }

void write(Level lvl, const std::string& msg) {
  if (static_cast<int>(lvl) > static_cast<int>(threshold())) return;
  std::lock_guard<std::mutex> lock(out_mutex());
  std::fprintf(stderr, "[ordgam %s] %s\n", tag(lvl), msg.c_str());
}

}  // namespace ordgam::log
