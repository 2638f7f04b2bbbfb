#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace iitnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitTraining = 3;

// Parses argv (program name excluded) and runs the selected subcommand.
// Terminal-facing text goes to `out`/`err`; file artifacts land under the
// command's --out run directory. Returns one of the exit codes above.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace iitnet::cli
