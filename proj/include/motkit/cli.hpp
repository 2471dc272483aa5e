#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace motkit::cli {

// Runs one toolkit command (simulate, stats, label, track, eval, ablate).
// `args` excludes the program name. Returns the process exit code: 0 on
// success, 1 for usage problems, 2 for data problems; errors are reported as
// one JSON object per line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace motkit::cli
