#pragma once

#include <string>
#include <vector>

namespace coag {

// Front-end dispatch: parses flags and a subcommand, runs the corresponding
// pipeline, and writes its artifacts under the configured output directory.
// Returns 0 on success, 1 on a failed check or runtime error, 2 on a
// configuration problem (in which case nothing is written).
int run_command(const std::vector<std::string>& args);

}  // namespace coag
