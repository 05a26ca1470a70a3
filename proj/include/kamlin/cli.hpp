#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kamlin {

/// Runs one CLI invocation; args excludes the program name.
/// Exit codes: 0 success, 2 validation error, 3 numerical or certificate failure.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kamlin
