#pragma once

#include <condition_variable>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>

#include "mosaic/operators/config.hpp"
#include "mosaic/telemetry/store.hpp"
#include "mosaic/util/clock.hpp"

namespace mosaic::evaluation {

inline constexpr std::string_view kSoftwareVersion = "1.0.0";

/// Event sink shared by runs and sessions: kind plus data document.
using EventSink = std::function<void(const std::string& kind, const Json& data)>;

/// Pause and stop requests for a running script, honoured between steps.
class RunControl {
 public:
  void pause();
  void resume();
  void stop();
  bool paused() const;
  bool stopped() const;
  /// Blocks while paused. Returns false once stop was requested.
  bool checkpoint();

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool paused_ = false;
  bool stopped_ = false;
};

struct RunOptions {
  std::filesystem::path home = telemetry::RunRegistry::default_home();
  std::optional<std::string> run_id;
  bool overwrite = false;
  std::filesystem::path worker_executable;
  std::shared_ptr<Clock> clock = default_clock();
  EventSink on_event;
  RunControl* control = nullptr;
  bool recover = true;
};

struct RunResult {
  std::string run_id;
  std::filesystem::path run_dir;
  std::string status = "finished";  // finished, failed, stopped
  std::uint64_t episodes = 0;
  std::optional<std::uint64_t> last_completed_episode;
  std::map<std::string, Reward> team_returns;
  std::map<std::string, std::uint64_t> wins;
  std::uint64_t draws = 0;
  std::uint64_t truncated_episodes = 0;
  double wall_seconds = 0;
  std::optional<std::string> error;

  bool ok() const { return status == "finished"; }
  Json to_json() const;
};

/// Reproducible id: operator, seed and a prefix of the config digest.
std::string default_run_id(const operators::RunConfig& config);

/// Script mode: one shared env, joint actions each step, JSONL telemetry.
/// Throws StateError when the run directory exists and overwrite is off,
/// ValidationError for configs that cannot run unattended. Worker failures
/// end in a result with status "failed" rather than an exception.
RunResult run_script(const operators::RunConfig& config, const RunOptions& options = {});

}  // namespace mosaic::evaluation
