#pragma once

// Command-line driver. Each subcommand is a file-based pipeline stage.

#include <iosfwd>
#include <string>
#include <vector>

namespace thz {

/// Runs one invocation; args excludes the program name. Returns the exit
/// code: 0 ok, 1 I/O, 2 validation, 3 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace thz
