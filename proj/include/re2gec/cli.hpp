#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace re2gec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// args[0] is the program name. Data goes to `out` unless --out is given.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace re2gec::cli
