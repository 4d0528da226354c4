#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mosaic/env/env.hpp"
#include "mosaic/operators/parse.hpp"
#include "mosaic/protocol/capability.hpp"
#include "mosaic/util/json.hpp"

namespace mosaic::operators {

enum class Paradigm { rl, llm, vlm, human, baseline };

/// Display form used in telemetry: RL, LLM, VLM, Human, Baseline.
std::string_view to_string(Paradigm p);
/// Lower-case form used in config documents.
std::string_view config_name(Paradigm p);
/// Accepts either form.
std::optional<Paradigm> paradigm_from_string(std::string_view text);
protocol::WorkerKind worker_kind(Paradigm p);

enum class BaselineKind { random, noop, cycle };
std::string_view to_string(BaselineKind k);
std::optional<BaselineKind> baseline_kind_from_string(std::string_view text);

/// rho (random), nu (noop) and the cycling baseline.
int baseline_action(BaselineKind kind, const ActionSpace& space, std::uint64_t step_index, Rng& rng);

struct WorkerAssignment {
  std::string agent_slot;
  Paradigm worker_type = Paradigm::baseline;
  Json settings = Json::object();
  bool frozen = false;

  /// settings.kind for baselines (random when absent).
  BaselineKind baseline_kind() const;
  /// settings.grammar / settings.fallback.
  ParsePolicy parse_policy() const;
  /// Observation modality implied by the paradigm plus settings.observation_mode
  /// and settings.max_image_history.
  env::ObservationOptions observation() const;
  /// External executable override (settings.executable), if any.
  std::optional<std::filesystem::path> executable() const;

  Json to_json() const;
  friend bool operator==(const WorkerAssignment&, const WorkerAssignment&) = default;
};

enum class StepMode { parallel, aec };

struct RunConfig {
  std::string schema_version = "1.0.0";
  std::string operator_id;
  std::string env_name = "mosaic";
  std::string task;
  StepMode mode = StepMode::parallel;
  std::uint64_t seed = 0;
  std::uint64_t episodes = 1;
  std::optional<std::uint64_t> max_steps;  // per episode, capped by the env horizon
  std::uint32_t checkpoint_every = 100;
  std::map<std::string, WorkerAssignment> player_workers;  // canonical slot order

  /// Validates structure and semantics; throws ConfigError listing every issue.
  static RunConfig from_json(const Json& doc);
  /// Strict text parse (duplicate keys are errors) followed by from_json.
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  Json to_json() const;
  std::string canonical() const { return canonical_dump(to_json()); }
  std::string digest() const;

  const env::TaskInfo& task_info() const { return env::task_info(task); }
  ActionSpace action_space() const;
  std::size_t slot_index(const std::string& slot) const;
};

struct ConfigIssue {
  std::string path;
  std::string message;
};

class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

/// Every problem in the document, empty when valid.
std::vector<ConfigIssue> validate_run_config(const Json& doc);

}  // namespace mosaic::operators
