#pragma once

// The mwlab command line: global experiment flags plus one subcommand per
// experiment (build, carleson, blowup, maxop, wns, accept).

#include <iosfwd>
#include <string>
#include <vector>

namespace mwlab::cli {

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kResourceError = 3 };

/// Runs the tool on argv-style arguments (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mwlab::cli
