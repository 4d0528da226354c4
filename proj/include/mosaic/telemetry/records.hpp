#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <variant>

#include "mosaic/util/json.hpp"
#include "mosaic/util/reward.hpp"

namespace mosaic::telemetry {

inline constexpr std::string_view kTelemetrySchemaVersion = "1.0.0";

/// One slot's decision at one env step. Carries no wall-clock field so that
/// logs of the same seeded run are byte-identical.
struct StepRecord {
  std::string schema_version{kTelemetrySchemaVersion};
  std::string run_id;
  std::string session_id;
  std::uint64_t episode_index = 0;
  std::uint64_t step_index = 0;  // zero-based within the episode
  std::string slot;
  std::string paradigm;  // RL, LLM, VLM, Human, Baseline
  std::int64_t action = 0;
  std::optional<std::string> raw_text;
  std::optional<std::string> parse_outcome;
  Reward reward;
  bool terminated = false;
  bool truncated = false;
  std::string obs_digest;
  std::optional<std::string> render_ref;

  Json to_json() const;
  static StepRecord from_json(const Json& doc);  // assumes a schema-valid document
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct EpisodeRecord {
  std::string schema_version{kTelemetrySchemaVersion};
  std::string run_id;
  std::string session_id;
  std::uint64_t episode_index = 0;
  std::uint64_t seed = 0;
  std::map<std::string, Reward> totals;  // per slot
  std::uint64_t episode_length = 0;
  std::map<std::string, std::int64_t> team_scores;
  std::string winner;  // team id or "draw"

  Json to_json() const;
  static EpisodeRecord from_json(const Json& doc);
  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

using Record = std::variant<StepRecord, EpisodeRecord>;

/// Canonical line for a record, including the trailing newline.
std::string to_line(const Record& record);

struct TelemetryError {
  enum class Kind { syntax, schema, version, run_mismatch, duplicate, order };
  Kind kind = Kind::syntax;
  std::string message;
  std::string raw;
};
std::string_view to_string(TelemetryError::Kind k);

using IngestResult = std::variant<StepRecord, EpisodeRecord, TelemetryError>;

/// Validates lines from untrusted producers. Remembers every accepted key so
/// that a repeated (session, episode, step, slot) or (session, episode) is
/// rejected.
class Ingestor {
 public:
  explicit Ingestor(std::string expected_run) : run_(std::move(expected_run)) {}
  IngestResult ingest_line(std::string_view raw);

 private:
  std::string run_;
  std::set<std::tuple<std::string, std::uint64_t, std::uint64_t, std::string>> step_keys_;
  std::set<std::pair<std::string, std::uint64_t>> episode_keys_;
};

}  // namespace mosaic::telemetry
