#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace affect::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kParseError = 3;
inline constexpr int kValidationError = 4;
inline constexpr int kIoError = 5;
inline constexpr int kNumericError = 6;
inline constexpr int kInternalError = 7;

/// Runs one subcommand; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace affect::cli
