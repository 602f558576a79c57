#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace difflab::cli {

/// Process exit codes.
enum ExitCode : int {
    Ok = 0,
    CheckFailed = 1,      // verify found a failing check
    InvalidInput = 2,     // bad arguments, unreadable or invalid model, point outside the domain
    Inconclusive = 3,     // classify could not decide a boundary or property
    NumericalFailure = 4  // a solver or simulation failed at run time
};

/// Runs one command line (without the program name). The JSON report (or CSV)
/// goes to out, the human-readable table and messages to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Tool version embedded in every report.
const char* version() noexcept;

}  // namespace difflab::cli
