#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hops::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kRuntime = 4 };

/// Runs `hops <subcommand> ...`. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hops::cli
