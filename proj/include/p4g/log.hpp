#pragma once

#include <string_view>

namespace p4g::log {

// Warnings go to stderr unless silenced; the count is kept either way.
void warn(std::string_view message);
void set_quiet(bool quiet);
size_t warning_count();
void reset_warning_count();

}  // namespace p4g::log
