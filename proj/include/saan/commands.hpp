#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace saan {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "SAAN_OUTPUT_DIR";

// Runs `saan <args...>` (args excludes the program name) and returns the
// exit code. Normal output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace saan
