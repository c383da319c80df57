// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synth, train, eval, ablate, params, gradcheck,
// smp-vis.
#pragma once

#include <iosfwd>

namespace sgn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Parses argv and runs one subcommand. Output files are written only when
/// the command succeeds.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sgn
