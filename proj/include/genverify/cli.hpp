#pragma once

#include <ostream>

namespace genverify {

/// Exit codes besides 0 (success) and CLI11's own usage-error codes.
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 3;

/// Entry point of the `genverify` tool. Subcommands: hash, prob, collide,
/// simulate, decode, trainsim. Reports go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace genverify
