#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rieszlat::cli {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kNumerical = 3,
  kBudget = 4,
  kTheoremViolation = 5,
};

/// Runs one command. args excludes the program name. The report goes to out,
/// diagnostics and usage text to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rieszlat::cli
