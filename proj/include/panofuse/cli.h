#pragma once

#include <string>
#include <vector>

namespace panofuse::cli {

// Entry point of the panofuse tool. Returns the process exit code:
// 0 success, 2 configuration, 3 I/O, 4 invalid input or internal failure.
int Main(int argc, const char* const* argv);

// Same, with the arguments after the program name.
int Main(const std::vector<std::string>& args);

}  // namespace panofuse::cli
