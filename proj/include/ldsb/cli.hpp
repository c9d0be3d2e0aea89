#pragma once

#include <iosfwd>

namespace ldsb::cli {

// Entry point of the `ldsb` tool. Returns 0 on success, 1 on usage or
// validation errors and 2 on runtime errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ldsb::cli
