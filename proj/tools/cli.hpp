#pragma once

#include <iosfwd>

namespace steg::cli {

enum ExitCode : int {
    kOk = 0,
    kNotFound = 1,     // no payload / no watermark
    kUsage = 2,        // bad flags, unreadable or invalid configuration
    kInvalidInput = 3, // malformed input data, empty payload
};

/// Runs `stegtool` with the given arguments. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace steg::cli
