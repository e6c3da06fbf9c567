#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace maskfuse {

// Subcommands: segment, eval, synth, export-object. `args` excludes the
// program name. Returns 0 on success, 1 on a user or data error, 2 on an
// internal invariant violation. All human-readable output goes to `log`.
int run_cli(const std::vector<std::string>& args, std::ostream& log);

}  // namespace maskfuse
