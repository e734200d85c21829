#pragma once

namespace tp {

// Dispatches argv to the subcommands. Returns the process exit code:
// 0 success, 1 user error (bad flags, missing files, malformed config),
// 2 internal error (contract violation, numerical diagnostics).
int run_cli(int argc, const char* const* argv);

}  // namespace tp
