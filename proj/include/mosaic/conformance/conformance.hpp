#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mosaic/util/clock.hpp"
#include "mosaic/util/json.hpp"

namespace mosaic::conformance {

/// Outcome of one scored check. Mandatory checks decide the verdict.
struct Check {
  std::string name;
  bool mandatory = true;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::string worker;
  std::vector<Check> checks;

  bool passed() const;
  /// First failed mandatory check, if any.
  std::optional<std::string> first_failure() const;
  Json to_json() const;
};

struct Options {
  std::filesystem::path worker;
  std::vector<std::string> args;
  /// Heartbeat timing is judged on a clock this many times faster than
  /// real time; the worker is told the real interval.
  double clock_scale = 120.0;
  Duration heartbeat_interval = std::chrono::seconds(60);
  /// Expected step transcript for reset(seed 42) on the corridor task. When
  /// set, the worker's typed responses must match it exactly.
  std::optional<std::filesystem::path> transcript;
  /// Real-time bound on any single response.
  Duration response_timeout = std::chrono::seconds(10);
};

/// Checks, in order: handshake, reset_seed_42, steps, episode_end,
/// determinism, transcript, restore_round_trip, malformed_command,
/// heartbeat_timing, stop. A check whose prerequisite failed is reported as
/// failed with detail "skipped".
Report run_suite(const Options& options);

}  // namespace mosaic::conformance
