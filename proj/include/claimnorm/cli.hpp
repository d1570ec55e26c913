#pragma once

#include <iosfwd>

namespace claimnorm::cli {

// Entry point of the claimnorm tool. Returns 0 on success, 1 for data errors
// (and runs with failed records), 2 for configuration or usage errors.
// `envp` supplies CLAIMNORM_* overrides and the LLM API key.
int run_command(int argc, const char* const* argv, char** envp, std::ostream& out, std::ostream& err);

}  // namespace claimnorm::cli
