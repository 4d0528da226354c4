#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mosaic/operators/config.hpp"
#include "mosaic/supervisor/supervisor.hpp"

namespace mosaic::operators {

/// Latest-wins slot for one human-controlled agent. Shared between the
/// control API (producer) and the evaluation engine (consumer).
class HumanMailbox {
 public:
  struct Ack {
    bool replaced = false;
    std::uint64_t barrier = 0;
  };
  Ack submit(int action, std::uint64_t barrier);
  /// Consumes the pending action, if any.
  std::optional<int> take();
  std::optional<int> peek() const;

 private:
  mutable std::mutex mu_;
  std::optional<int> pending_;
  std::uint64_t submitted_at_ = 0;
};

class BlockedError : public MosaicError {
 public:
  explicit BlockedError(std::vector<std::string> slots);
  const std::vector<std::string>& slots() const { return slots_; }

 private:
  std::vector<std::string> slots_;
};

/// A joint action failed; no slot's result is used.
class JointActionError : public MosaicError {
 public:
  explicit JointActionError(std::map<std::string, std::string> failures);
  const std::map<std::string, std::string>& failures() const { return failures_; }

 private:
  std::map<std::string, std::string> failures_;
};

struct Decision {
  int action = 0;
  std::optional<std::string> raw_text;
  std::optional<ParseOutcome> parse_outcome;
};

struct BindOptions {
  /// Built-in worker binary used unless a slot's settings name an executable.
  std::filesystem::path worker_executable;
  /// Prefix for supervisor worker ids; the slot name is appended.
  std::string name_prefix;
  Duration heartbeat_interval = std::chrono::seconds(60);
  Duration liveness_window = std::chrono::seconds(300);
  std::optional<Duration> request_timeout;
  std::map<std::string, std::string> worker_env;
  /// Respawn and restore a worker that dies mid-request, then retry.
  bool recover = false;
};

/// Sibling of the running binary named `name`, else `name` on PATH.
std::filesystem::path sibling_executable(const std::string& name);

/// Binding of every agent slot of a RunConfig to its decision-maker. Worker
/// slots get one supervised process each; human slots get a mailbox.
class OperatorHandle {
 public:
  /// Spawns the workers. Throws ValidationError for slot problems and
  /// SpawnError when a worker cannot start; workers already spawned are
  /// stopped first.
  static std::unique_ptr<OperatorHandle> bind(const RunConfig& config, supervisor::Supervisor& sup,
                                              BindOptions options);
  ~OperatorHandle();
  OperatorHandle(const OperatorHandle&) = delete;
  OperatorHandle& operator=(const OperatorHandle&) = delete;

  const RunConfig& config() const { return config_; }
  const std::vector<std::string>& slots() const { return slots_; }
  Paradigm paradigm(const std::string& slot) const;
  const WorkerAssignment& assignment(const std::string& slot) const;
  /// Null for slots that are not human-controlled.
  HumanMailbox* mailbox(const std::string& slot) const;
  std::optional<std::string> worker_id(const std::string& slot) const;

  /// Resets every worker for a new episode and clears per-episode state
  /// (image histories, fallback streams).
  void begin_episode(std::uint64_t run_seed, std::uint64_t episode_index);

  /// Observation for `slot` in its paradigm's modality. Multimodal slots get
  /// their recent frames appended; call once per decision.
  ObservationPayload observe(const env::EnvState& state, const std::string& slot);

  /// Human slots whose mailbox is empty.
  std::vector<std::string> blocked_slots() const;

  /// AEC form. Throws BlockedError, WorkerError, WorkerDeadError, ParseError.
  Decision select_action(const std::string& slot, const ObservationPayload& obs, const Json& info = Json::object());

  /// Parallel form: requests go out together and results are assembled in
  /// canonical slot order. Throws BlockedError before contacting any worker,
  /// or JointActionError naming every failed slot.
  std::map<std::string, Decision> select_actions(const std::map<std::string, ObservationPayload>& observations,
                                                 const Json& info = Json::object());

  /// Forwards a training request. Refused for frozen slots.
  void train(const std::string& slot, const Json& payload = Json::object());

  /// Stops every worker. Idempotent.
  void close();

 private:
  struct Slot;
  OperatorHandle(RunConfig config, supervisor::Supervisor& sup, BindOptions options);
  Slot& slot(const std::string& name);
  const Slot& slot(const std::string& name) const;
  Json request_payload(const std::string& slot, const ObservationPayload& obs, const Json& info) const;
  Decision finish(Slot& s, const protocol::ProtocolMessage& response);
  protocol::ProtocolMessage call(Slot& s, const Json& payload);

  RunConfig config_;
  supervisor::Supervisor& sup_;
  BindOptions options_;
  ActionSpace space_;
  std::vector<std::string> slots_;
  std::map<std::string, std::unique_ptr<Slot>> by_slot_;
  bool closed_ = false;
};

}  // namespace mosaic::operators
