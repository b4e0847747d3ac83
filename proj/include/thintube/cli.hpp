#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace thintube::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Subcommands: section, geometry, effective, sweep, neumann, tube3d,
/// essential, report. `args` excludes the program name. Each subcommand reads
/// an optional --config document; flags override document fields.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace thintube::cli
