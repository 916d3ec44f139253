#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pyrseiz::cli {

/// Runs one command line (without the program name). Returns the process
/// exit code; diagnostics go to `err` as a single line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pyrseiz::cli
