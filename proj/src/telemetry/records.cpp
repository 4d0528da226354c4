#include "mosaic/telemetry/records.hpp"

#include "mosaic/protocol/schema.hpp"
#include "mosaic/protocol/version.hpp"

namespace mosaic::telemetry {

Json StepRecord::to_json() const {
  Json j{{"schema_version", schema_version},
         {"run_id", run_id},
         {"session_id", session_id},
         {"episode_index", episode_index},
         {"step_index", step_index},
         {"slot", slot},
         {"paradigm", paradigm},
         {"action", action},
         {"reward", reward.to_double()},
         {"terminated", terminated},
         {"truncated", truncated},
         {"obs_digest", obs_digest}};
  if (raw_text) j["raw_text"] = *raw_text;
  if (parse_outcome) j["parse_outcome"] = *parse_outcome;
  if (render_ref) j["render_ref"] = *render_ref;
  return j;
}

StepRecord StepRecord::from_json(const Json& d) {
  StepRecord r;
  r.schema_version = d.at("schema_version").get<std::string>();
  r.run_id = d.at("run_id").get<std::string>();
  r.session_id = d.at("session_id").get<std::string>();
  r.episode_index = d.at("episode_index").get<std::uint64_t>();
  r.step_index = d.at("step_index").get<std::uint64_t>();
  r.slot = d.at("slot").get<std::string>();
  r.paradigm = d.at("paradigm").get<std::string>();
  r.action = d.at("action").get<std::int64_t>();
  if (d.contains("raw_text")) r.raw_text = d["raw_text"].get<std::string>();
  if (d.contains("parse_outcome")) r.parse_outcome = d["parse_outcome"].get<std::string>();
  r.reward = Reward::from_double(d.at("reward").get<double>());
  r.terminated = d.at("terminated").get<bool>();
  r.truncated = d.at("truncated").get<bool>();
  r.obs_digest = d.at("obs_digest").get<std::string>();
  if (d.contains("render_ref")) r.render_ref = d["render_ref"].get<std::string>();
  return r;
}

Json EpisodeRecord::to_json() const {
  Json totals_j = Json::object();
  for (const auto& [slot, r] : totals) totals_j[slot] = r.to_double();
  return Json{{"schema_version", schema_version},
              {"run_id", run_id},
              {"session_id", session_id},
              {"episode_index", episode_index},
              {"seed", seed},
              {"totals", totals_j},
              {"episode_length", episode_length},
              {"team_scores", team_scores},
              {"winner", winner}};
}

EpisodeRecord EpisodeRecord::from_json(const Json& d) {
  EpisodeRecord r;
  r.schema_version = d.at("schema_version").get<std::string>();
  r.run_id = d.at("run_id").get<std::string>();
  r.session_id = d.at("session_id").get<std::string>();
  r.episode_index = d.at("episode_index").get<std::uint64_t>();
  r.seed = d.value("seed", std::uint64_t{0});
  for (const auto& [slot, v] : d.at("totals").items()) r.totals[slot] = Reward::from_double(v.get<double>());
  r.episode_length = d.at("episode_length").get<std::uint64_t>();
  r.team_scores = d.at("team_scores").get<std::map<std::string, std::int64_t>>();
  r.winner = d.at("winner").get<std::string>();
  return r;
}

std::string to_line(const Record& record) {
  return std::visit([](const auto& r) { return canonical_dump(r.to_json()) + "\n"; }, record);
}

std::string_view to_string(TelemetryError::Kind k) {
  switch (k) {
    case TelemetryError::Kind::syntax: return "syntax";
    case TelemetryError::Kind::schema: return "schema";
    case TelemetryError::Kind::version: return "version";
    case TelemetryError::Kind::run_mismatch: return "run_mismatch";
    case TelemetryError::Kind::duplicate: return "duplicate";
    case TelemetryError::Kind::order: return "order";
  }
  return "?";
}

IngestResult Ingestor::ingest_line(std::string_view raw) {
  auto fail = [&](TelemetryError::Kind kind, std::string message) {
    return TelemetryError{kind, std::move(message), std::string(raw)};
  };
  std::string_view body = raw;
  if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  Json doc = parse_json_or_discard(body);
  if (doc.is_discarded() || !doc.is_object()) return fail(TelemetryError::Kind::syntax, "not a JSON object");

  const bool is_step = doc.contains("slot");
  const Json& schema = protocol::schema(is_step ? "step_record" : "episode_record");
  if (auto version = doc.find("schema_version"); version != doc.end() && version->is_string()) {
    auto v = protocol::SemVer::parse(version->get<std::string>());
    auto ours = protocol::SemVer::parse(std::string(kTelemetrySchemaVersion));
    if (!v || v->major != ours->major) {
      return fail(TelemetryError::Kind::version, "unsupported schema_version " + version->get<std::string>());
    }
  }
  if (auto violation = protocol::validate(doc, schema)) {
    return fail(TelemetryError::Kind::schema, violation->path + ": " + violation->message);
  }
  if (doc["run_id"] != run_) {
    return fail(TelemetryError::Kind::run_mismatch, "record for run " + doc["run_id"].get<std::string>());
  }
  if (is_step) {
    auto rec = StepRecord::from_json(doc);
    if (!step_keys_.emplace(rec.session_id, rec.episode_index, rec.step_index, rec.slot).second) {
      return fail(TelemetryError::Kind::duplicate, "duplicate step (" + std::to_string(rec.episode_index) + ", " +
                                                        std::to_string(rec.step_index) + ", " + rec.slot + ")");
    }
    return rec;
  }
  auto rec = EpisodeRecord::from_json(doc);
  if (!episode_keys_.emplace(rec.session_id, rec.episode_index).second) {
    return fail(TelemetryError::Kind::duplicate, "duplicate episode " + std::to_string(rec.episode_index));
  }
  return rec;
}

}  // namespace mosaic::telemetry
