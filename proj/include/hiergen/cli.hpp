#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hiergen {

// Subcommand front end. Returns 0 on success, 1 on a usage error and 2 on a
// runtime error. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace hiergen
