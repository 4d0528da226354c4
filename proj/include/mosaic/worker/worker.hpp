#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "mosaic/worker/policy.hpp"

// Runtime shared by the native worker executables: speaks the line protocol
// on a pair of file descriptors. Policy workers answer select_action;
// single-agent tasks can also run env-owning with step.
namespace mosaic::worker {

/// Test-only misbehaviours. A fault keyed to a step fires once per marker
/// file: the first process to reach the step creates the marker, a restarted
/// process that finds it behaves normally.
struct FaultPlan {
  bool ignore_stop = false;         // also ignores SIGTERM
  bool garbage_handshake = false;   // first line is not a handshake
  bool garbage_output = false;      // every reply is replaced by junk
  bool omit_episode_end = false;    // answers a finished episode with step_result
  bool no_heartbeat = false;
  bool echo_identity = false;       // ready.env_metadata gains pid and worker_id
  bool spawn_grandchild = false;    // leaves a sleeping child in the process group
  std::optional<std::uint64_t> silent_at_step;  // stops heartbeats and replies
  std::optional<std::uint64_t> crash_at_step;   // exits with status 3
  std::string marker_file;
};

struct WorkerOptions {
  PolicyKind kind = PolicyKind::random;
  std::uint32_t max_image_history = 0;
  /// Real seconds between the heartbeat deadlines the supervisor enforces;
  /// heartbeats are emitted twice per interval.
  double heartbeat_secs = 60.0;
  FaultPlan faults;
};

/// Reads MOSAIC_HEARTBEAT_SECS when set.
double heartbeat_secs_from_env(double fallback = 60.0);

/// Serves until stop or end of input. Returns the process exit status.
int run_worker(const WorkerOptions& options, int in_fd = 0, int out_fd = 1);

}  // namespace mosaic::worker
