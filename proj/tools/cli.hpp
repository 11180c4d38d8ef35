#ifndef VCCNET_TOOLS_CLI_HPP
#define VCCNET_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace vccnet::cli {

/// Runs one command line. Exit status: 0 success, 1 I/O failure, 2 invalid
/// input or configuration; failures print {"error": {"code", "message"}} to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vccnet::cli

#endif  // VCCNET_TOOLS_CLI_HPP
