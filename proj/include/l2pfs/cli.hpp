#pragma once

#include <string>
#include <vector>

namespace l2pfs {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;        // bad flags or unreadable input
inline constexpr int kExitNotConverged = 2; // partial results were written

// Full command-line entry point; args excludes the program name.
// Subcommands: select, sweep-p, synth, eval.
int run_cli(const std::vector<std::string>& args);

}  // namespace l2pfs
