#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tomopet {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 2,
    kExitIo = 3,
    kExitInternal = 4,
};

/// Runs one tomopet invocation. `args` excludes the program name. Results
/// and help go to `out`, one-line diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace tomopet
