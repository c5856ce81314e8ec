#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace invsel {

/// Exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNumerical = 2, kExitCheckFailed = 3 };

/// Runs one invocation (`args` excludes the program name). Results go to
/// `out`; diagnostics go to `err`, errors as a single line
/// "ERROR <exit code>: <kind>: <message>".
int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace invsel
