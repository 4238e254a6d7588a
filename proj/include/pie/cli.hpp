#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pie::cli {

// Runs one pietool invocation. args excludes the program name. Returns the
// exit code: 0 success or feasible, 1 expected negative (inadmissible,
// inconsistent, not certified, failed suite), 2 error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pie::cli
