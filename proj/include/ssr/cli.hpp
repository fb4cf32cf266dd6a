#pragma once

#include <string>
#include <vector>

namespace ssr {

// Entry point shared by the binary and the tests: args is argv without the
// program name. Returns the process exit code: 0 success, 1 invalid input
// or flags, 2 runtime failure. Every subcommand resolves its config, writes
// resolved_config.json into the run directory and logs a one-line summary.
int run_cli(const std::vector<std::string>& args);

}  // namespace ssr
