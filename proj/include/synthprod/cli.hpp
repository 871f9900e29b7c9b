#pragma once

#include <iosfwd>

#include "synthprod/error.hpp"

namespace synthprod::cli {

// Exit codes: 0 success, 1 internal, 2 usage, 3 I/O, 4 invalid input,
// 5 provider failure.
int exit_code(ErrorKind kind);

// Runs one subcommand. Failures print a single JSON line
// {"error": <kind>, "message": ...} to err.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace synthprod::cli
