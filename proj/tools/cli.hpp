#pragma once

#include <iosfwd>

namespace sigmalr {

/// Entry point of the sigma-lowrank command line tool. Returns the process
/// exit code: 0 success, 2 invalid input, 3 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sigmalr
