#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace regadj::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;      // I/O and unexpected errors
inline constexpr int kInvalid = 2;      // bad flags, input or model
inline constexpr int kSingular = 3;     // rank-deficient design
inline constexpr int kNoConverge = 4;   // IRLS divergence

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace regadj::cli
