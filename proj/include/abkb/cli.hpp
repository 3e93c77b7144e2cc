#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace abkb {

/// Command-line entry point; args[0] is the program name. Returns 0 on
/// success, 2 on usage errors and 1 on runtime errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace abkb
