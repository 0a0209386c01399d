#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace omnilab::cli {

/// Exit codes of the omnilab tool.
enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

/// Parses `args` (without the program name) and runs the subcommand.
/// Usage problems and invalid configs return kUsageError; failures while
/// running return kRuntimeError.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace omnilab::cli
