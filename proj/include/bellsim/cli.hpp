#pragma once

#include <iosfwd>

namespace bellsim {

/// Entry point of the `bellsim` tool. Returns the process exit code:
/// 0 success, 2 validation, 3 runtime/convergence, 4 I/O.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bellsim
