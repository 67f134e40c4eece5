#pragma once

#include <string>

#include "netchoice/simplex.hpp"

namespace netchoice {

/// The program in the textual LP format (objective, Subject To, Bounds, End). Numbers use the
/// shortest representation that round-trips, so equal programs give identical bytes.
[[nodiscard]] std::string write_lp(const LinearProgram& program);

} // namespace netchoice
