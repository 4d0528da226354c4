#include "mosaic/telemetry/store.hpp"

#include "mosaic/util/digest.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

namespace mosaic::telemetry {

std::optional<Stream> stream_from_string(std::string_view text) {
  if (text == "steps") return Stream::steps;
  if (text == "episodes") return Stream::episodes;
  return std::nullopt;
}

std::filesystem::path stream_path(const std::filesystem::path& run_dir, Stream stream, std::string_view session) {
  const char* name = stream == Stream::steps ? "steps.jsonl" : "episodes.jsonl";
  if (session == kMainSession) return run_dir / name;
  return run_dir / "sessions" / std::string(session) / name;
}

std::filesystem::path deadletter_path(const std::filesystem::path& run_dir) {
  return run_dir / "telemetry.deadletter";
}

TelemetryWriter::TelemetryWriter(std::filesystem::path run_dir, std::string run_id, std::string session_id)
    : run_dir_(std::move(run_dir)),
      run_id_(std::move(run_id)),
      session_id_(std::move(session_id)),
      steps_(JsonlLog::open(stream_path(run_dir_, Stream::steps, session_id_), true)),
      episodes_(JsonlLog::open(stream_path(run_dir_, Stream::episodes, session_id_), true)),
      ingestor_(run_id_) {}

void TelemetryWriter::append(const StepRecord& r) {
  if (r.run_id != run_id_ || r.session_id != session_id_) throw ValidationError("run_id", "record for another run");
  auto key = std::make_tuple(r.episode_index, r.step_index, r.slot);
  if (last_step_ && key <= *last_step_) {
    throw StateError("step record (" + std::to_string(r.episode_index) + ", " + std::to_string(r.step_index) + ", " +
                     r.slot + ") out of order");
  }
  steps_.append(to_line(r), IndexKey{r.episode_index, r.step_index});
  last_step_ = key;
}

void TelemetryWriter::append(const EpisodeRecord& r) {
  if (r.run_id != run_id_ || r.session_id != session_id_) throw ValidationError("run_id", "record for another run");
  episodes_.append(to_line(r), IndexKey{r.episode_index, 0});
}

IngestResult TelemetryWriter::ingest(std::string_view raw) {
  IngestResult result = ingestor_.ingest_line(raw);
  if (auto* err = std::get_if<TelemetryError>(&result)) {
    quarantine(*err);
    return result;
  }
  try {
    std::visit(
        [&](const auto& r) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(r)>, TelemetryError>) append(r);
        },
        result);
  } catch (const MosaicError& e) {
    TelemetryError err{TelemetryError::Kind::order, e.what(), std::string(raw)};
    quarantine(err);
    return err;
  }
  return result;
}

void TelemetryWriter::quarantine(const TelemetryError& error) {
  ++dead_letters_;
  Json entry{{"kind", to_string(error.kind)}, {"reason", error.message}, {"session_id", session_id_}};
  // Raw bytes may not be valid UTF-8; keep them recoverable.
  entry["raw_base64"] = base64_encode(as_bytes(error.raw));
  std::ofstream out(deadletter_path(run_dir_), std::ios::binary | std::ios::app);
  out << canonical_dump(entry) << '\n';
  if (!out) throw MosaicError("cannot write dead-letter file");
}

void TelemetryWriter::flush(bool durable) {
  steps_.flush(durable);
  episodes_.flush(durable);
}

Json Aggregates::to_json() const {
  Json returns = Json::object();
  for (const auto& [ep, slots] : episode_returns) {
    Json per = Json::object();
    for (const auto& [slot, r] : slots) per[slot] = r.to_double();
    returns[std::to_string(ep)] = per;
  }
  Json totals = Json::object();
  for (const auto& [slot, r] : slot_totals) totals[slot] = r.to_double();
  Json fb = Json::object();
  for (const auto& [slot, f] : fallback) {
    fb[slot] = {{"parsed_steps", f.parsed_steps}, {"fallbacks", f.fallbacks}, {"rate", f.rate()}};
  }
  return Json{{"episodes", episodes}, {"steps", steps},     {"episode_returns", returns}, {"slot_totals", totals},
              {"wins", wins},         {"draws", draws},     {"fallback", fb}};
}

namespace {

bool in_range(const QueryFilter& f, std::uint64_t episode) {
  return (!f.first_episode || episode >= *f.first_episode) && (!f.last_episode || episode <= *f.last_episode);
}

}  // namespace

Aggregates query(const std::filesystem::path& run_dir, const QueryFilter& filter) {
  if (!std::filesystem::exists(run_dir)) throw NotFoundError("unknown run " + run_dir.filename().string());
  Aggregates a;
  JsonlLog::for_each_line(stream_path(run_dir, Stream::steps, filter.session_id), [&](std::string_view line) {
    Json d = parse_json_or_discard(line);
    if (!d.is_object()) return;
    const auto episode = d.value("episode_index", std::uint64_t{0});
    const auto slot = d.value("slot", std::string());
    if (!in_range(filter, episode) || (filter.slot && *filter.slot != slot)) return;
    ++a.steps;
    const Reward r = Reward::from_double(d.value("reward", 0.0));
    a.episode_returns[episode][slot] += r;
    a.slot_totals[slot] += r;
    if (auto it = d.find("parse_outcome"); it != d.end()) {
      auto& fb = a.fallback[slot];
      ++fb.parsed_steps;
      if (*it != "parsed") ++fb.fallbacks;
    }
  });
  JsonlLog::for_each_line(stream_path(run_dir, Stream::episodes, filter.session_id), [&](std::string_view line) {
    Json d = parse_json_or_discard(line);
    if (!d.is_object() || !in_range(filter, d.value("episode_index", std::uint64_t{0}))) return;
    ++a.episodes;
    const auto winner = d.value("winner", std::string("draw"));
    if (winner == "draw") {
      ++a.draws;
    } else {
      ++a.wins[winner];
    }
  });
  return a;
}

std::string export_jsonl(const std::filesystem::path& run_dir, Stream stream, std::string_view session) {
  if (!std::filesystem::exists(run_dir)) throw NotFoundError("unknown run " + run_dir.filename().string());
  std::string out;
  JsonlLog::for_each_line(stream_path(run_dir, stream, session), [&](std::string_view line) {
    out.append(line);
    out.push_back('\n');
  });
  return out;
}

void reconcile(const std::filesystem::path& run_dir, std::string_view session) {
  std::map<std::uint64_t, std::map<std::string, Reward>> sums;
  std::map<std::uint64_t, std::uint64_t> max_step;
  JsonlLog::for_each_line(stream_path(run_dir, Stream::steps, session), [&](std::string_view line) {
    auto r = StepRecord::from_json(Json::parse(line));
    sums[r.episode_index][r.slot] += r.reward;
    auto& m = max_step[r.episode_index];
    m = std::max(m, r.step_index + 1);
  });
  std::vector<std::string> problems;
  JsonlLog::for_each_line(stream_path(run_dir, Stream::episodes, session), [&](std::string_view line) {
    auto e = EpisodeRecord::from_json(Json::parse(line));
    const std::string where = "episode " + std::to_string(e.episode_index);
    if (max_step[e.episode_index] != e.episode_length) {
      problems.push_back(where + ": episode_length " + std::to_string(e.episode_length) + " but steps cover " +
                         std::to_string(max_step[e.episode_index]));
    }
    const auto& summed = sums[e.episode_index];
    for (const auto& [slot, total] : e.totals) {
      auto it = summed.find(slot);
      const Reward s = it == summed.end() ? Reward{} : it->second;
      if (s != total) {
        problems.push_back(where + " slot " + slot + ": total " + std::to_string(total.milli()) +
                           "m but steps sum to " + std::to_string(s.milli()) + "m");
      }
    }
    for (const auto& [slot, s] : summed) {
      if (!e.totals.count(slot)) problems.push_back(where + ": no total for slot " + slot);
    }
  });
  if (!problems.empty()) {
    std::string msg = "telemetry does not reconcile:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ReconciliationError(msg);
  }
}

Json RunManifest::to_json() const {
  Json j{{"schema_version", schema_version}, {"run_id", run_id},   {"operator_id", operator_id},
         {"config_digest", config_digest},   {"seed", seed},       {"episodes", episodes},
         {"created_at", created_at},         {"software_version", software_version},
         {"workers", workers},               {"status", status}};
  if (finished_at) j["finished_at"] = *finished_at;
  if (error) j["error"] = *error;
  return j;
}

RunManifest RunManifest::from_json(const Json& d) {
  RunManifest m;
  m.schema_version = d.value("schema_version", m.schema_version);
  m.run_id = d.at("run_id").get<std::string>();
  m.operator_id = d.value("operator_id", std::string());
  m.config_digest = d.at("config_digest").get<std::string>();
  m.seed = d.at("seed").get<std::uint64_t>();
  m.episodes = d.value("episodes", std::uint64_t{0});
  m.created_at = d.at("created_at").get<std::string>();
  if (d.contains("finished_at")) m.finished_at = d["finished_at"].get<std::string>();
  m.software_version = d.value("software_version", std::string());
  m.workers = d.value("workers", Json::array());
  m.status = d.at("status").get<std::string>();
  if (d.contains("error")) m.error = d["error"].get<std::string>();
  return m;
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << bytes;
    if (!out) throw MosaicError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest) {
  write_atomic(run_dir / "manifest", canonical_dump(manifest.to_json()) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& run_dir) {
  std::ifstream in(run_dir / "manifest", std::ios::binary);
  if (!in) throw NotFoundError("no manifest in " + run_dir.string());
  std::stringstream text;
  text << in.rdbuf();
  return RunManifest::from_json(Json::parse(text.str()));
}

RunRegistry::RunRegistry(std::filesystem::path home) : home_(std::move(home)) {}

std::filesystem::path RunRegistry::default_home() {
  if (const char* h = std::getenv("MOSAIC_HOME"); h && *h) return h;
  return std::filesystem::current_path();
}

bool RunRegistry::exists(const std::string& run_id) const {
  return !run_id.empty() && run_id.find('/') == std::string::npos && run_id != "." && run_id != ".." &&
         std::filesystem::exists(run_dir(run_id) / "manifest");
}

std::vector<std::string> RunRegistry::list() const {
  std::vector<std::string> out;
  if (!std::filesystem::exists(runs_dir())) return out;
  for (const auto& entry : std::filesystem::directory_iterator(runs_dir())) {
    if (std::filesystem::exists(entry.path() / "manifest")) out.push_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

RunManifest RunRegistry::manifest(const std::string& run_id) const {
  if (!exists(run_id)) throw NotFoundError("unknown run " + run_id);
  return read_manifest(run_dir(run_id));
}

}  // namespace mosaic::telemetry
