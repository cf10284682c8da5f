#ifndef VASSO_CLI_HPP
#define VASSO_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace vasso {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the vasso-opt command line tool.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vasso

#endif  // VASSO_CLI_HPP
