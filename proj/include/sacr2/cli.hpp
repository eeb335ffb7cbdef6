#pragma once

namespace sacr2 {

/// Command-line entry point (gen-demos, run, plot, gradcheck,
/// validate-config). Returns the process exit status: 0 on success, 2 on
/// malformed flags, 1 on any other failure.
int cli_main(int argc, const char* const* argv);

}  // namespace sacr2
