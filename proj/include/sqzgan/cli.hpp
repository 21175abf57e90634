#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sqzgan {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verification or numeric failure
inline constexpr int kExitUsage = 2;    // usage or configuration error

/// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace sqzgan
