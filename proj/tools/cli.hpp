#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hgr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one `hgr` invocation. args[0] is the program name.
int run(std::vector<std::string> args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace hgr::cli
