#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace margin {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `margin-engine` tool. `args` excludes the program name.
/// Reports go to `out` unless --out is given; errors go to `err` as JSON.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace margin
