#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace p4g::cli {

// Exit codes: 0 success, 1 domain/data error, 2 usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace p4g::cli
