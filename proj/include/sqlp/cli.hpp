#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sqlp::cli {

// Exit codes.
inline constexpr int kExitOptimal = 0;
inline constexpr int kExitNotConverged = 1;  // max iterations, slow progress
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitUsage = 64;

/// Column order of the per-iteration log.
inline constexpr const char* kLogHeader =
    " it        mu     sigma   alpha_p   alpha_d    relgap   pinfeas   dinfeas  path";

/// Parses `args` (without the program name), solves and reports. Results go
/// to `out`, the iteration log and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace sqlp::cli
