#pragma once

#include <iosfwd>

namespace wgf {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Parses argv (argv[0] is the program name), runs one subcommand and
// returns its exit code. Metrics JSON goes to --metrics when given, else to
// `out`; one-line error messages go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wgf
