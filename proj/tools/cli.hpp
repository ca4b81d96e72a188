#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace regtune::cli {

/// Runs one CLI invocation. `args` excludes the program name.
/// Returns 0 on success, 2 on usage/validation errors, 1 on runtime errors.
int cmd_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace regtune::cli
