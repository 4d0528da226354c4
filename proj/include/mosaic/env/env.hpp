#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mosaic/observation.hpp"
#include "mosaic/util/digest.hpp"
#include "mosaic/util/errors.hpp"
#include "mosaic/util/json.hpp"
#include "mosaic/util/reward.hpp"
#include "mosaic/util/rng.hpp"

// Built-in deterministic grid worlds. Rules are documented in docs/envs.md;
// the canonical byte layout of EnvState in docs/state_encoding.md.
namespace mosaic::env {

inline constexpr std::string_view kCorridorTask = "mosaic/Corridor-v1";
inline constexpr std::string_view kTeamTagTask = "mosaic/TeamTag-2vs2-v1";

struct Pos {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Pos&, const Pos&) = default;
};

enum class Direction : std::uint8_t { north = 0, south = 1, west = 2, east = 3 };
enum class Cell : std::uint8_t { empty = 0, goal = 1 };

enum class ObservationMode { egocentric, visible_teammates };
std::string_view to_string(ObservationMode m);
std::optional<ObservationMode> observation_mode_from_string(std::string_view text);

/// Static description of a registered task.
struct TaskInfo {
  std::string task_id;
  std::vector<std::string> slots;  // canonical (lexicographic) order
  std::vector<std::string> action_labels;
  int null_action = 0;
  int width = 0;
  int height = 0;
  int horizon = 0;
  std::vector<std::int64_t> tensor_shape;  // view_h, view_w, channels
  std::string team_a;
  std::string team_b;  // empty for single-team tasks

  int num_actions() const { return static_cast<int>(action_labels.size()); }
  /// Document advertised to workers and clients (ready.env_metadata).
  Json metadata() const;
};

class UnknownTaskError : public NotFoundError {
 public:
  explicit UnknownTaskError(std::string_view task)
      : NotFoundError("unknown task '" + std::string(task) + "'") {}
};

/// Throws UnknownTaskError.
const TaskInfo& task_info(std::string_view task_id);
std::vector<std::string> registered_tasks();

struct TeamPartition {
  std::set<std::string> team_a;
  std::set<std::string> team_b;
  std::size_t size_a() const { return team_a.size(); }
  std::size_t size_b() const { return team_b.size(); }
  std::size_t total() const { return team_a.size() + team_b.size(); }
};

struct EnvState {
  std::string task_id;
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
  std::vector<Cell> grid;  // row-major, width * height
  std::map<std::string, Pos> agent_positions;
  std::map<std::string, Direction> agent_orientations;
  std::map<std::string, std::string> team_of;
  std::map<std::string, std::int64_t> score;
  std::uint64_t step_index = 0;
  std::uint64_t episode_index = 0;
  std::uint32_t turn = 0;  // index into the canonical slot list, AEC only
  bool terminated = false;
  bool truncated = false;
  Rng rng;

  bool done() const { return terminated || truncated; }
  const TaskInfo& info() const { return task_info(task_id); }
  const std::string& turn_slot() const { return info().slots.at(turn); }
  TeamPartition partition() const;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct ObservationOptions {
  ObservationModality modality = ObservationModality::tensor;
  std::uint32_t max_image_history = 0;
  ObservationMode mode = ObservationMode::egocentric;
};

/// Observation options per slot; slots not listed get a tensor observation.
using ObservationSpecs = std::map<std::string, ObservationOptions>;

struct Transition {
  std::string slot;
  ObservationPayload observation;
  Reward reward;
  bool terminated = false;
  bool truncated = false;
  Json info = Json::object();
};

struct ParallelStep {
  EnvState state;
  std::vector<Transition> transitions;  // canonical slot order
};

struct AecStep {
  EnvState state;
  Transition transition;
  std::string next_slot;
  /// Rewards of every slot that received one during this move.
  std::map<std::string, Reward> rewards;
};

class StepError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Initial state; a pure function of its arguments.
EnvState make_env(std::string_view task_id, std::uint64_t seed, std::uint64_t episode_index = 0);

/// Simultaneous move. Throws StepError for missing, extra or out-of-range
/// actions and StateError once the episode is over.
ParallelStep step_parallel(const EnvState& state, const std::map<std::string, int>& actions,
                           const ObservationSpecs& specs = {});

/// One agent acts. Throws StateError naming the expected slot when `slot`
/// does not hold the turn.
AecStep step_aec(const EnvState& state, std::string_view slot, int action,
                 const ObservationSpecs& specs = {});

/// Current-frame observation. For text_image the payload carries one frame;
/// callers that keep a history append earlier frames (see ImageHistory).
ObservationPayload serialize_obs(const EnvState& state, std::string_view slot,
                                 const ObservationOptions& options);

inline constexpr int kTileSize = 16;
enum class RenderMode { ascii, rgb };

std::string render_ascii(const EnvState& state);
RgbImage render_rgb(const EnvState& state);
/// Raw blob: ascii text bytes, or packed RGB pixels.
Bytes render(const EnvState& state, RenderMode mode);

/// Versioned canonical byte layout.
Bytes encode_state(const EnvState& state);
/// Throws ValidationError on malformed input.
EnvState decode_state(std::span<const std::uint8_t> bytes);

}  // namespace mosaic::env
