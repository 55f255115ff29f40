#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace minrepair::cli {

// Exit codes: 0 success, 1 domain error, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace minrepair::cli
