#pragma once

#include <iosfwd>

namespace trilost {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace trilost
