#include "p4g/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace p4g::log {

namespace {
std::atomic<bool> g_quiet{false};
std::atomic<size_t> g_warnings{0};
std::mutex g_mutex;
}  // namespace

void warn(std::string_view message) {
  ++g_warnings;
  if (g_quiet) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "warning: " << message << '\n';
}

void set_quiet(bool quiet) { g_quiet = quiet; }
size_t warning_count() { return g_warnings; }
void reset_warning_count() { g_warnings = 0; }

}  // namespace p4g::log
