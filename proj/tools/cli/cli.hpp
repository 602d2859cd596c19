#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace densedet::cli {

// Runs one invocation; args excludes the program name. Returns the exit code:
// 0 ok, 1 I/O, 2 input or schema, 3 verification failure, 4 divergence.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace densedet::cli
