#pragma once

#include <ostream>

namespace xdesign::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 2;
inline constexpr int kInapplicable = 3;
inline constexpr int kNumericFailure = 4;

/// Entry point behind the `xdesign` binary; argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace xdesign::cli
