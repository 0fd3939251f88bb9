#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dsr {

/// Exit codes of the dsr command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the dsr command; args exclude the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dsr
