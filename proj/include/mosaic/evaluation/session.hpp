#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "mosaic/evaluation/run.hpp"
#include "mosaic/operators/handle.hpp"
#include "mosaic/supervisor/supervisor.hpp"
#include "mosaic/telemetry/store.hpp"

namespace mosaic::evaluation {

struct Badge {
  std::string slot;
  std::string paradigm;
  std::string color;
  Json to_json() const;
};

/// Display colour of a paradigm: RL purple, LLM blue, Human orange,
/// VLM teal, Baseline gray.
std::string_view badge_color(operators::Paradigm p);

enum class SessionStatus { running, paused, finished, failed };
std::string_view to_string(SessionStatus s);

struct SessionOptions {
  std::string session_id;  // generated when empty
  std::string run_id;      // defaults to the session id
  /// Telemetry root; each replica writes sessions/<session_id>.r<i>/ under it.
  std::filesystem::path run_dir;
  std::filesystem::path worker_executable;
  std::shared_ptr<Clock> clock = default_clock();
  std::size_t max_replicas = 6;
  EventSink on_event;
};

struct BarrierOutcome {
  bool advanced = false;
  /// Replica index to the human slots still waiting for input.
  std::map<std::size_t, std::vector<std::string>> blocked;
  /// Per-replica records in replica order.
  std::vector<std::vector<telemetry::StepRecord>> records;
};

struct Frame {
  std::size_t replica = 0;
  std::uint64_t barrier = 0;
  std::string ascii;
  RgbImage rgb;
  std::vector<Badge> badges;
};

/// Manual mode: N operators, each with its own env replica built from the
/// same (task, seed), advanced together one barrier at a time.
class ManualSession {
 public:
  /// Binding failures are rethrown with the replica index in the message.
  static std::unique_ptr<ManualSession> open(std::vector<operators::RunConfig> operators, const std::string& task,
                                             std::uint64_t seed, SessionOptions options);
  ~ManualSession();

  /// One barrier. Returns a blocked outcome, with nothing advanced, while a
  /// human slot lacks input. Any other failure marks the session failed and
  /// advances no replica. Throws StateError unless running.
  BarrierOutcome step();
  void pause();
  void resume();
  /// Finalizes telemetry and stops the workers.
  void stop();

  const std::string& session_id() const { return id_; }
  SessionStatus status() const;
  std::uint64_t barrier() const;
  std::size_t replica_count() const { return replicas_.size(); }
  /// Steps taken by each replica since the session opened.
  std::vector<std::uint64_t> replica_steps() const;
  std::uint64_t episode_index(std::size_t replica) const;
  env::EnvState state(std::size_t replica) const;
  const std::vector<Badge>& badges(std::size_t replica) const;
  std::string replica_session_id(std::size_t replica) const;
  std::string failure() const;

  /// Throws NotFoundError for an unknown replica or slot and
  /// ValidationError for a slot that is not human-controlled.
  operators::HumanMailbox& mailbox(std::size_t replica, const std::string& slot);
  /// Frames after barrier `b` (0 is the initial state). NotFoundError for
  /// barriers not reached yet.
  std::vector<Frame> frames(std::uint64_t b) const;

 private:
  struct Replica;
  ManualSession() = default;
  void emit(const std::string& kind, const Json& data);
  void set_status(SessionStatus s);

  std::string id_;
  std::string task_;
  std::uint64_t seed_ = 0;
  SessionOptions options_;
  std::unique_ptr<supervisor::Supervisor> sup_;
  std::vector<std::unique_ptr<Replica>> replicas_;
  std::vector<std::vector<env::EnvState>> history_;  // [barrier][replica]
  std::uint64_t barrier_ = 0;
  SessionStatus status_ = SessionStatus::running;
  std::string failure_;
  bool closed_ = false;
  mutable std::mutex mu_;
};

}  // namespace mosaic::evaluation
