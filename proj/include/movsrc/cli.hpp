#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace movsrc {

/// Runs one command line (without the program name). Returns 0 on success,
/// 2 on usage errors and 1 on runtime failures. Help text goes to `out`,
/// diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

}  // namespace movsrc
