#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bgwtilt::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kPropertyFailed = 1;
inline constexpr int kInputError = 2;
inline constexpr int kDivergence = 3;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bgwtilt::cli
