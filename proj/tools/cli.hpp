#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace discsent::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Parses `args` (without the program name) and runs the verb. Results go to
/// `out`, diagnostics and log lines to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace discsent::cli
