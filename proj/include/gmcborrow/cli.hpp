#pragma once

#include <string>
#include <vector>

namespace gmc {

// Runs one subcommand. args excludes the program name and is in natural order.
// Returns the process exit code: 0 success, 2 usage or validation failure,
// 3 runtime failure.
int cli_dispatch(std::vector<std::string> args);

}  // namespace gmc
