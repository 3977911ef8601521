#pragma once

#include <iosfwd>

namespace pgpois {

/// Entry point for the `pgpois` tool. Returns the process exit code:
/// 0 success, 2 bad arguments, 3 data or I/O errors, 4 numeric failures.
int run_cli(int argc, char** argv);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace pgpois
