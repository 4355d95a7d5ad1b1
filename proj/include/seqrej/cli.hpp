#pragma once
#include <string>
#include <vector>

namespace seqrej::cli {

// Batch driver behind the seqrejectron binary. Subcommands: gen-data, fit,
// eval, sweep, demo. Returns 0 on success, 2 on configuration errors, 1 on
// runtime errors.
int run(const std::vector<std::string>& args);

} // namespace seqrej::cli
