#pragma once

#include <iosfwd>

namespace relikit::io {

/// Entry point of the relikit command line. Returns the process exit code:
/// 0 on success, 1 on runtime errors, 2 on usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace relikit::io
