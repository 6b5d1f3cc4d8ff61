#pragma once

#include <iosfwd>

namespace surf {

/// Entry point of the `surf` command. Returns 0 on success, 1 when a check
/// reported failure, 2 on configuration or usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace surf
