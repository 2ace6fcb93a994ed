#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spadnn {

// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "SPADNN_OUT_DIR";

// Entry point of the `spadnn` tool. `args` excludes the program name.
// Returns 0 on success, 1 usage, 2 data, 3 numeric/training failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spadnn
