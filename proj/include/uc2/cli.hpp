#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace uc2 {

// Runs one CLI invocation; args excludes the program name. Returns the exit
// status: 0 ok, 1 usage/config, 2 I/O or format, 3 numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace uc2
