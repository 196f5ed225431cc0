#pragma once

namespace fvmatch {

/// Entry point behind the fvmatch binary; exposed for tests.
/// Returns 0 on success, 1 on validation/usage errors, 2 on numeric failures.
int run_cli(int argc, const char* const* argv);

}  // namespace fvmatch
