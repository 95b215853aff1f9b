#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace hrf {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "HRF_OUTPUT_DIR";

/// Runs the `hrf` command line. `args` excludes the program name. Returns
/// 0 on success, 1 on a runtime or data error, 2 on a usage error.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace hrf
