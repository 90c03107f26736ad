#pragma once

#include <iostream>

namespace vastopo {

// Exit codes: 0 success, 1 usage error, 2 data or validation error.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace vastopo
