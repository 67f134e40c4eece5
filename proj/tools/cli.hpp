#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace netchoice::cli {

enum ExitCode : int { ok = 0, usage = 1, invalid = 2, failed = 3 };

/// Entry point of the `netchoice` tool with the program name stripped from `args`.
/// Results go to `out` (or the --out file), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace netchoice::cli
