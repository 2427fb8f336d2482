#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace netshock::cli {

// Runs one subcommand. args excludes the program name. Returns the process
// exit status; failures print a single "error: <category>: <message>" line to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Exit status used for each error category (usage = 2, ...).
int exit_code_for(const std::string& category);

}  // namespace netshock::cli
