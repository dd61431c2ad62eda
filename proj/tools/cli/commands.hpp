#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace conse::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kSuccess = 0,
  kInputError = 2,
  kDegenerateData = 3,
};

/// Runs the tool with argv-style arguments (args[0] is the program name).
/// Never calls exit(); all output goes to the given streams or to files.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace conse::cli
