#pragma once

#include <ostream>
#include <span>
#include <string>

namespace hrrpgnet::cli {

enum ExitCode : int {
  kSuccess = 0,
  kInternal = 1,
  kUsage = 2,
  kData = 3,
  kNumeric = 4,
};

/// Runs one `hrrpgnet` invocation. `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace hrrpgnet::cli
