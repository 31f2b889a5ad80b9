#pragma once

namespace marc {

/// Entry point of the `marc` tool. Returns the process exit code; errors are
/// reported as a single line on stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace marc
