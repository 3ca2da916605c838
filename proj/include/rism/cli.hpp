#pragma once

#include <string>
#include <vector>

namespace rism::cli {

// Runs one CLI invocation (args excludes the program name). Exit codes:
// 0 ok, 2 usage error, 3 data error, 4 numeric failure.
int run(const std::vector<std::string>& args);

}  // namespace rism::cli
