#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mosaic/protocol/capability.hpp"
#include "mosaic/protocol/message.hpp"
#include "mosaic/supervisor/process.hpp"
#include "mosaic/util/clock.hpp"
#include "mosaic/util/digest.hpp"

namespace mosaic::supervisor {

using namespace std::chrono_literals;

struct WorkerSpec {
  std::string name;  // becomes the worker id; generated when empty
  std::filesystem::path executable;
  std::vector<std::string> args;
  std::map<std::string, std::string> env_vars;
  std::filesystem::path working_dir;
  protocol::WorkerKind worker_kind = protocol::WorkerKind::baseline;
  /// Durations are on the supervisor's clock. The worker is told the real
  /// heartbeat interval through MOSAIC_HEARTBEAT_SECS unless env_vars sets it.
  Duration heartbeat_interval = 60s;
  Duration liveness_window = 300s;
  Duration startup_timeout = 30s;
  std::uint32_t max_restarts = 3;
  /// Capabilities the worker must advertise in its handshake.
  protocol::CapabilityManifest required;

  /// Throws ValidationError.
  void check() const;
};

enum class WorkerState { starting, ready, busy, paused, dead, recovering };
std::string_view to_string(WorkerState s);

struct CheckpointRef {
  std::string worker_id;
  std::uint64_t episode_index = 0;
  std::uint64_t step_index = 0;
  std::uint64_t seed = 0;
  std::string digest;          // sha256 of the blob
  std::filesystem::path path;  // blob; the digest sidecar sits at path + ".sha256"
  Timestamp created_at;
};

/// Reads a checkpoint blob, verifying it against its sidecar and the ref.
/// Returns nullopt on any mismatch or read failure.
std::optional<Bytes> load_checkpoint(const CheckpointRef& ref);

struct WorkerInfo {
  std::string worker_id;
  pid_t pid = -1;
  pid_t process_group_id = -1;
  WorkerState state = WorkerState::starting;
  Timestamp last_heartbeat;
  std::uint32_t restarts_used = 0;
  protocol::NegotiatedSession session;
  std::string dead_reason;
};

struct LivenessEvent {
  enum class Kind { missed_heartbeat, dead, permanent_failure, recovered };
  std::string worker_id;
  Kind kind = Kind::missed_heartbeat;
  Timestamp at;
  Duration silence{0};
  std::string detail;
};
std::string_view to_string(LivenessEvent::Kind k);

struct ExitReport {
  enum class Path { protocol, terminated, forced };
  std::string worker_id;
  Path path = Path::protocol;
  std::optional<int> exit_code;
  std::optional<int> signal;
  /// Group members (beyond the leader) that had to be killed.
  int leftovers_killed = 0;
};
std::string_view to_string(ExitReport::Path p);

/// The worker answered with an `error` response.
class WorkerError : public MosaicError {
 public:
  WorkerError(std::string worker_id, const std::string& message, Json payload = Json::object())
      : MosaicError(worker_id + ": " + message), worker_id_(std::move(worker_id)), payload_(std::move(payload)) {}
  const std::string& worker_id() const { return worker_id_; }
  const Json& payload() const { return payload_; }

 private:
  std::string worker_id_;
  Json payload_;
};

/// The handle died (exit, timeout, silence or protocol violation) before
/// answering. The handle is dead afterwards and may be recovered.
class WorkerDeadError : public MosaicError {
 public:
  WorkerDeadError(std::string worker_id, const std::string& reason)
      : MosaicError(worker_id + " is dead: " + reason), worker_id_(std::move(worker_id)) {}
  const std::string& worker_id() const { return worker_id_; }

 private:
  std::string worker_id_;
};

class PermanentFailure : public MosaicError {
 public:
  using MosaicError::MosaicError;
};

struct SupervisorOptions {
  /// Logs go to <run_dir>/workers, checkpoints to <run_dir>/checkpoints.
  std::filesystem::path run_dir;
  std::shared_ptr<Clock> clock = default_clock();
  /// Called for every event monitor() emits, on the calling thread.
  std::function<void(const LivenessEvent&)> on_event;
};

/// Owns worker processes. Thread-safe: the evaluation engine issues
/// requests while a monitor thread polls liveness.
class Supervisor {
 public:
  explicit Supervisor(SupervisorOptions options);
  ~Supervisor();
  Supervisor(const Supervisor&) = delete;
  Supervisor& operator=(const Supervisor&) = delete;

  /// Starts the process and negotiates its handshake. Returns the worker id.
  /// Throws SpawnError or NegotiationFailure; the group is killed first.
  std::string spawn(const WorkerSpec& spec);

  /// Sends a command and waits for its response. Heartbeats are consumed on
  /// the way. `timeout` defaults to the worker's liveness window. Throws
  /// WorkerError for error responses, WorkerDeadError when the worker dies or
  /// times out, StateError when the handle is not ready.
  protocol::ProtocolMessage request(const std::string& worker_id, protocol::MessageName name,
                                    Json payload = Json::object(), std::optional<Duration> timeout = std::nullopt);

  /// Pipelined form: send now, await later. Several commands may be in
  /// flight to different workers at once.
  std::uint64_t send(const std::string& worker_id, protocol::MessageName name, Json payload = Json::object());
  protocol::ProtocolMessage await(const std::string& worker_id, std::uint64_t correlation_id,
                                  std::optional<Duration> timeout = std::nullopt);

  /// Liveness check at the clock's current reading. Emits each warning once
  /// per silence and each dead verdict once.
  std::vector<LivenessEvent> monitor();

  /// Respawns a dead worker and restores it: reset with the recorded
  /// payload, restore from the newest valid checkpoint of the current
  /// episode, then replay of the commands issued after it. Throws
  /// PermanentFailure when the restart budget is spent.
  void recover(const std::string& worker_id);

  /// stop, then SIGTERM to the group after `grace`, then SIGKILL. Always
  /// reaps; repeated calls return the first report.
  ExitReport stop_worker(const std::string& worker_id, Duration grace = 2s);

  void pause(const std::string& worker_id);
  void resume(const std::string& worker_id);

  /// Test hook: SIGKILLs the worker's group without telling the handle.
  void kill_for_test(const std::string& worker_id);

  WorkerInfo info(const std::string& worker_id) const;
  std::vector<std::string> worker_ids() const;
  std::vector<CheckpointRef> checkpoints(const std::string& worker_id) const;
  std::filesystem::path log_path(const std::string& worker_id) const;
  const Clock& clock() const { return *options_.clock; }

  /// Stops every worker.
  void shutdown(Duration grace = 1s);

 private:
  struct Worker;
  Worker& find(const std::string& worker_id) const;
  void start_process(Worker& w);
  void mark_dead(Worker& w, const std::string& reason);
  void record(Worker& w, const protocol::ProtocolMessage& cmd, const protocol::ProtocolMessage& response);
  void replay(Worker& w);
  protocol::ProtocolMessage await_locked(Worker& w, std::uint64_t id, Duration timeout, bool replaying);

  SupervisorOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<Worker>> workers_;
  std::uint64_t next_name_ = 0;
};

class NegotiationFailure : public SpawnError {
 public:
  NegotiationFailure(const std::string& message, std::string first_line, pid_t process_group)
      : SpawnError(message), first_line_(std::move(first_line)), process_group_(process_group) {}
  const std::string& first_line() const { return first_line_; }
  /// Group of the rejected process; already killed and reaped.
  pid_t process_group() const { return process_group_; }

 private:
  std::string first_line_;
  pid_t process_group_;
};

/// Drives Supervisor::monitor from a background thread every `tick` of real
/// time until destroyed.
class MonitorThread {
 public:
  MonitorThread(Supervisor& supervisor, std::chrono::milliseconds tick);
  ~MonitorThread();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mosaic::supervisor
