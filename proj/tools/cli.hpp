#pragma once

namespace robusteval::cli {

/// Entry point of the `robusteval` command. Returns the process exit code:
/// 0 on success, 2 on usage or input validation failure, 1 on internal error.
int run(int argc, const char* const* argv);

}  // namespace robusteval::cli
