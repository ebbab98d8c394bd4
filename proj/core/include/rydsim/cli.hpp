#pragma once

#include <string>
#include <vector>

namespace rydsim::cli {

/// Runs one CLI invocation (subcommands: run, fit, calibrate, report).
/// Returns the process exit code: 0 on success, 2 on malformed
/// configuration, 3 on numerical failure, 1 otherwise. Diagnostics go to
/// stderr, results to the configured output files and stdout.
int execute(const std::vector<std::string>& args);

int execute(int argc, const char* const* argv);

}  // namespace rydsim::cli
