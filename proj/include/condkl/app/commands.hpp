#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "condkl/app/config.hpp"

namespace condkl::app {

/// Environment variable that overrides the configured output directory
/// (an explicit --out still wins).
inline constexpr const char* kOutputDirEnv = "CONDKL_OUTPUT_DIR";

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitLocked = 3;

struct CommandOptions {
  std::string command;
  /// Path to an INI file or the name of a built-in preset.
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

std::vector<std::string> command_names();

/// Reads a config file, or returns the preset of that name.
ExperimentConfig load_config(const std::string& path_or_preset);

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<std::string>& out);

/// Runs one subcommand. Progress and timings go to `log`. On failure a
/// machine-readable error.json is written to the output directory when
/// possible and a nonzero exit code is returned.
int run_command(const CommandOptions& options, std::ostream& log);

}  // namespace condkl::app
