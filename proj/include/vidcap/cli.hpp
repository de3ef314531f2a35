#pragma once

#include <string>
#include <vector>

namespace vidcap {
namespace cli {

/// Runs one subcommand given argv-style arguments (program name excluded).
/// Returns the process exit code: 0 success, 2 config error, 3 missing
/// artifact, 4 numeric failure.
int run(const std::vector<std::string>& args);

/// main() adapter.
int run(int argc, const char* const* argv);

}  // namespace cli
}  // namespace vidcap
