#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pointer/config.hpp"
#include "pointer/diagnostics.hpp"

namespace pointer {

struct RunOptions {
  /// Run directory; empty keeps everything in memory. An existing directory
  /// is never reused: "-1", "-2", ... is appended instead.
  std::filesystem::path directory;
  bool parallel = false;
};

struct RunResult {
  ExperimentReport report;
  std::filesystem::path directory;  // empty when nothing was written
  std::vector<std::string> artifacts;
  int exit_code = 0;                // 0 when every check passed, 3 otherwise
};

/// Default output root: $DECOHERENCE_OUT, else ./runs.
std::filesystem::path default_output_root();

/// First non-existing path among dir, dir-1, dir-2, ...
std::filesystem::path unique_directory(const std::filesystem::path& dir);

/// Runs the selected solvers and diagnostics. ConfigError and NumericalAbort
/// propagate; a manifest is still written when a directory was given.
RunResult execute(const RunConfig& cfg, const RunOptions& options = {});

}  // namespace pointer
