#ifndef SACNET_TOOLS_COMMANDS_HPP
#define SACNET_TOOLS_COMMANDS_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace sacnet::tools {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitShape = 3,
  kExitNumeric = 4,
  kExitProtocol = 5,
};

/// Runs the command line `args` (without the program name) in-process.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sacnet::tools

#endif  // SACNET_TOOLS_COMMANDS_HPP
