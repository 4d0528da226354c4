#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mosaic/telemetry/log.hpp"
#include "mosaic/telemetry/records.hpp"
#include "mosaic/util/errors.hpp"

// On-disk layout of a run directory:
//   config.json            canonical RunConfig bytes
//   manifest               RunManifest (canonical JSON)
//   result                 summary written at finalize
//   steps.jsonl(.idx)      StepRecords of session "main"
//   episodes.jsonl         EpisodeRecords of session "main"
//   sessions/<id>/...      the same pair for any other session
//   telemetry.deadletter   rejected lines with reasons
namespace mosaic::telemetry {

inline constexpr std::string_view kMainSession = "main";

enum class Stream { steps, episodes };
std::optional<Stream> stream_from_string(std::string_view text);

std::filesystem::path stream_path(const std::filesystem::path& run_dir, Stream stream,
                                  std::string_view session = kMainSession);
std::filesystem::path deadletter_path(const std::filesystem::path& run_dir);

class ReconciliationError : public MosaicError {
 public:
  using MosaicError::MosaicError;
};

/// Single writer for one session of a run. Enforces ordering and uniqueness
/// and routes rejected proxy lines to the dead-letter file.
class TelemetryWriter {
 public:
  TelemetryWriter(std::filesystem::path run_dir, std::string run_id, std::string session_id = std::string(kMainSession));

  void append(const StepRecord& record);
  void append(const EpisodeRecord& record);

  /// Proxy role: validates a line produced elsewhere. Valid records are
  /// appended; anything else goes to the dead-letter file with its reason.
  IngestResult ingest(std::string_view raw);

  /// Durable at episode boundaries.
  void flush(bool durable = true);

  const JsonlLog& steps() const { return steps_; }
  const JsonlLog& episodes() const { return episodes_; }
  std::uint64_t dead_letters() const { return dead_letters_; }

 private:
  void quarantine(const TelemetryError& error);

  std::filesystem::path run_dir_;
  std::string run_id_;
  std::string session_id_;
  JsonlLog steps_;
  JsonlLog episodes_;
  Ingestor ingestor_;
  std::optional<std::tuple<std::uint64_t, std::uint64_t, std::string>> last_step_;
  std::uint64_t dead_letters_ = 0;
};

struct QueryFilter {
  std::string session_id{kMainSession};
  std::optional<std::string> slot;
  std::optional<std::uint64_t> first_episode;
  std::optional<std::uint64_t> last_episode;  // inclusive
};

struct FallbackStats {
  std::uint64_t parsed_steps = 0;  // steps carrying a parse outcome
  std::uint64_t fallbacks = 0;     // fell_back_* or error
  double rate() const { return parsed_steps == 0 ? 0.0 : static_cast<double>(fallbacks) / parsed_steps; }
};

struct Aggregates {
  std::uint64_t episodes = 0;
  std::uint64_t steps = 0;
  std::map<std::uint64_t, std::map<std::string, Reward>> episode_returns;  // from StepRecords
  std::map<std::string, Reward> slot_totals;                               // from StepRecords
  std::map<std::string, std::uint64_t> wins;                               // from EpisodeRecords
  std::uint64_t draws = 0;
  std::map<std::string, FallbackStats> fallback;

  Json to_json() const;
};

/// Streams the session's logs once; memory grows with episodes and slots,
/// not with steps.
Aggregates query(const std::filesystem::path& run_dir, const QueryFilter& filter = {});

/// Bytes of a stream (empty when the file does not exist yet).
std::string export_jsonl(const std::filesystem::path& run_dir, Stream stream,
                         std::string_view session = kMainSession);

/// Checks every EpisodeRecord against its StepRecords: exact per-slot
/// totals and episode_length = max step_index + 1. Throws ReconciliationError.
void reconcile(const std::filesystem::path& run_dir, std::string_view session = kMainSession);

struct RunManifest {
  std::string schema_version{kTelemetrySchemaVersion};
  std::string run_id;
  std::string operator_id;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::uint64_t episodes = 0;
  std::string created_at;
  std::optional<std::string> finished_at;
  std::string software_version;
  Json workers = Json::array();
  std::string status = "running";
  std::optional<std::string> error;

  Json to_json() const;
  static RunManifest from_json(const Json& doc);
};

/// ISO-8601 UTC wall-clock time, second precision.
std::string utc_now();

/// Written through a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& bytes);
void write_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& run_dir);

/// Runs under <home>/runs.
class RunRegistry {
 public:
  explicit RunRegistry(std::filesystem::path home);
  /// $MOSAIC_HOME, else the working directory (so runs land in ./runs).
  static std::filesystem::path default_home();

  std::filesystem::path runs_dir() const { return home_ / "runs"; }
  std::filesystem::path run_dir(const std::string& run_id) const { return runs_dir() / run_id; }
  bool exists(const std::string& run_id) const;
  /// Sorted run ids that have a manifest.
  std::vector<std::string> list() const;
  /// Throws NotFoundError.
  RunManifest manifest(const std::string& run_id) const;

 private:
  std::filesystem::path home_;
};

}  // namespace mosaic::telemetry
