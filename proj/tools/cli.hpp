#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sktag::cli {

enum ExitCode : int {
  kOk = 0,
  kUsageError = 1,
  kDataError = 2,
  kModelError = 3,
};

/// Runs one subcommand. `args` excludes the program name. Progress and
/// diagnostics go to `err`; summaries and data written to "-" go to `out`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace sktag::cli
