#pragma once

namespace cowdet {

/// Entry point of the `cowdet` tool. Returns 0 on success, 1 on usage
/// errors and 2 on data or validation errors.
int run_cli(int argc, char** argv);

}  // namespace cowdet
