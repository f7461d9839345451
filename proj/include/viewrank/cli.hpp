#pragma once

#include <iosfwd>

namespace viewrank {

inline constexpr const char* kVersion = "0.1.0";

// Runs one subcommand. Returns the process exit code (see ExitCode); error
// messages go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace viewrank
