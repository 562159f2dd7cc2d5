#pragma once

#include <iosfwd>

namespace m3ot {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,         // any other error (I/O, internal)
  kExitParseError = 2,      // malformed interchange file
  kExitInvalidConfig = 3,   // bad config file, flag or preset name
  kExitNonConvergence = 4,  // policy learning hit the epoch limit (policy still written)
  kExitFrameMismatch = 5,   // track and truth frames disagree, or frames out of order
};

/// Runs `m3ot <subcommand> ...`. Results go to --out when given, otherwise to
/// `out`; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace m3ot
