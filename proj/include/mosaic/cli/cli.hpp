#pragma once

#include <filesystem>
#include <ostream>
#include <string>

namespace mosaic::cli {

// Stable process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitUnreachable = 3;
inline constexpr int kExitNotFound = 4;

/// Entry point of the `mosaic` command. Writes exactly one JSON document to
/// `out` (none for --help) and human-readable text to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// A config path, or a bare name looked up as <name> / <name>.json under
/// $MOSAIC_CONFIG_DIR, ./configs and the installed configs directory.
/// Throws NotFoundError.
std::filesystem::path resolve_config(const std::string& name_or_path);

}  // namespace mosaic::cli
