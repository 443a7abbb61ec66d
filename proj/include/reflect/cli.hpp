#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace reflect::cli {

enum ExitCode : int {
    kOk = 0,
    kValidation = 1,  // bad config, flags, or inputs
    kPartial = 2,     // ran, but some work failed; partial artifacts kept
};

// Entry point shared by the `reflect` binary and in-process tests. `args[0]` is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace reflect::cli
