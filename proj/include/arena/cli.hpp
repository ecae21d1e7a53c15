#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace arena {

/// Runs one command line (without the program name). Errors are printed to
/// `err` as "<CODE>: <message>" and yield a nonzero exit code; usage errors
/// exit with 2.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace arena
