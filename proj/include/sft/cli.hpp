#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sft::cli {

// Parses args (without the program name), runs one subcommand and writes its
// run manifest. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sft::cli
