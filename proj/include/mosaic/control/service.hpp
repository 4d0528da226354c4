#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "mosaic/telemetry/store.hpp"
#include "mosaic/util/clock.hpp"
#include "mosaic/util/json.hpp"

namespace mosaic::control {

inline constexpr int kDefaultPort = 7461;

/// Ordered, replayable event log for one run or session. Sequence numbers
/// start at 1 and have no gaps.
class EventBus {
 public:
  explicit EventBus(std::string subject);

  std::uint64_t publish(const std::string& kind, Json data);
  /// Events with seq > after.
  std::vector<Json> since(std::uint64_t after) const;
  /// Like since(), but waits up to `timeout` (real time) for at least one
  /// event unless the bus is closed.
  std::vector<Json> wait(std::uint64_t after, Duration timeout) const;
  void close();
  bool closed() const;
  std::uint64_t last_seq() const;
  const std::string& subject() const { return subject_; }

 private:
  std::string subject_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<Json> events_;
  bool closed_ = false;
};

/// A verb was refused because a human slot has no pending action.
class BlockedConflict : public StateError {
 public:
  explicit BlockedConflict(Json waiting)
      : StateError("waiting for human input"), waiting_(std::move(waiting)) {}
  const Json& waiting() const { return waiting_; }

 private:
  Json waiting_;
};

struct ServiceOptions {
  std::filesystem::path home = telemetry::RunRegistry::default_home();
  std::filesystem::path worker_executable;
  std::shared_ptr<Clock> clock = default_clock();
  std::size_t max_replicas = 6;
};

/// Transport-independent daemon state. Errors: ValidationError (bad input),
/// NotFoundError (unknown subject), StateError (illegal transition).
/// Verbs on one subject are serialized; a verb that loses a race against a
/// conflicting one sees the new status and is refused.
class ControlService {
 public:
  explicit ControlService(ServiceOptions options);
  ~ControlService();
  ControlService(const ControlService&) = delete;
  ControlService& operator=(const ControlService&) = delete;

  // Runs (script mode).
  /// Body is a run config document. Returns {run_id, status: created}.
  Json create_run(std::string_view body, std::optional<std::string> run_id = std::nullopt);
  /// verb: start, pause, resume, stop.
  Json run_control(const std::string& run_id, const std::string& verb);
  Json get_run(const std::string& run_id) const;
  Json list_runs() const;
  std::string export_run(const std::string& run_id, telemetry::Stream stream) const;
  Json query_run(const std::string& run_id, const telemetry::QueryFilter& filter) const;
  /// Blocks until the run leaves running/paused or `timeout` elapses.
  Json wait_run(const std::string& run_id, Duration timeout) const;

  // Manual sessions.
  /// Body: {task, seed, operators: [config...], session_id?}. Workers are
  /// spawned by the start verb.
  Json create_session(std::string_view body);
  /// verb: start, step, pause, resume, stop.
  Json session_control(const std::string& session_id, const std::string& verb);
  /// Body: {replica, slot, action}. Returns {replaced, barrier}.
  Json submit_action(const std::string& session_id, std::string_view body);
  Json frames(const std::string& session_id, std::uint64_t barrier) const;
  Json get_session(const std::string& session_id) const;
  Json list_sessions() const;
  std::string export_session(const std::string& session_id, std::size_t replica, telemetry::Stream stream) const;

  /// Registered tasks with slots, action labels and the keyboard map used
  /// for human slots (KeyboardEvent.code to action label).
  static Json envs();

  /// Event log of a run or session.
  std::shared_ptr<EventBus> events(const std::string& subject) const;

  /// Stops every run and session.
  void shutdown();

  const ServiceOptions& options() const { return options_; }

 private:
  struct RunEntry;
  struct SessionEntry;
  std::shared_ptr<RunEntry> run(const std::string& id) const;
  std::shared_ptr<SessionEntry> session(const std::string& id) const;
  void finish_run(const std::shared_ptr<RunEntry>& entry);

  ServiceOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<RunEntry>> runs_;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions_;
};

}  // namespace mosaic::control
