#pragma once

namespace bdlab::cli {

// Full command-line entry point (also used by tests to drive the tool
// in-process). Returns the process exit status: 0 success, 2 configuration
// error, 3 numerical failure, 4 test verdict failure.
int run(int argc, const char* const* argv);

}  // namespace bdlab::cli
