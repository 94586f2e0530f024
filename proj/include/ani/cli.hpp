#pragma once

#include <iosfwd>

namespace ani::cli {

// Runs one subcommand: gen-graph, simulate, estimate, diagnose, mc, oracle.
// Returns 0 on success, 1 on input errors (including bad flags), 2 on capacity
// or numeric errors.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ani::cli
