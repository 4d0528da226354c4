#include "mosaic/protocol/message.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "mosaic/protocol/schema.hpp"

namespace mosaic::protocol {

namespace {

struct NameEntry {
  MessageName name;
  std::string_view text;
  MessageKind kind;
};

constexpr std::array<NameEntry, 12> kNames{{
    {MessageName::reset, "reset", MessageKind::command},
    {MessageName::step, "step", MessageKind::command},
    {MessageName::stop, "stop", MessageKind::command},
    {MessageName::select_action, "select_action", MessageKind::command},
    {MessageName::restore, "restore", MessageKind::command},
    {MessageName::train, "train", MessageKind::command},
    {MessageName::ready, "ready", MessageKind::response},
    {MessageName::step_result, "step_result", MessageKind::response},
    {MessageName::episode_end, "episode_end", MessageKind::response},
    {MessageName::error, "error", MessageKind::response},
    {MessageName::heartbeat, "heartbeat", MessageKind::response},
    {MessageName::handshake, "handshake", MessageKind::response},
}};

constexpr std::string_view kCommandKey = "cmd";
constexpr std::string_view kResponseKey = "type";
constexpr std::string_view kCorrelationKey = "correlation_id";
constexpr std::string_view kVersionKey = "v";

bool is_envelope_key(std::string_view key) {
  return key == kCommandKey || key == kResponseKey || key == kCorrelationKey ||
         key == kVersionKey;
}

// Returns a description of the first value nlohmann would write lossily or
// refuse to write.
std::optional<std::string> unencodable(const Json& value) {
  switch (value.type()) {
    case Json::value_t::number_float:
      if (!std::isfinite(value.get<double>())) return "non-finite number";
      return std::nullopt;
    case Json::value_t::string:
      try {
        (void)canonical_dump(value);
      } catch (const Json::exception& e) {
        return std::string("invalid UTF-8 string");
      }
      return std::nullopt;
    case Json::value_t::binary:
      return "binary values are not representable";
    case Json::value_t::discarded:
      return "discarded value";
    case Json::value_t::array:
      for (const auto& v : value) {
        if (auto why = unencodable(v)) return why;
      }
      return std::nullopt;
    case Json::value_t::object:
      for (const auto& [k, v] : value.items()) {
        if (auto why = unencodable(Json(k))) return "key " + *why;
        if (auto why = unencodable(v)) return why;
      }
      return std::nullopt;
    default:
      return std::nullopt;
  }
}

DecodeError fail(DecodeFailure failure, std::string field, std::string detail,
                 std::string_view raw) {
  return DecodeError{failure, std::move(field), std::move(detail), std::string(raw)};
}

}  // namespace

std::string_view to_string(MessageName name) {
  for (const auto& e : kNames) {
    if (e.name == name) return e.text;
  }
  return "?";
}

std::optional<MessageName> message_name_from_string(std::string_view text) {
  for (const auto& e : kNames) {
    if (e.text == text) return e.name;
  }
  return std::nullopt;
}

MessageKind kind_of(MessageName name) {
  for (const auto& e : kNames) {
    if (e.name == name) return e.kind;
  }
  return MessageKind::command;
}

std::string_view to_string(DecodeFailure failure) {
  switch (failure) {
    case DecodeFailure::framing: return "framing";
    case DecodeFailure::syntax: return "syntax";
    case DecodeFailure::unknown_name: return "unknown-name";
    case DecodeFailure::schema: return "schema";
    case DecodeFailure::version: return "version";
  }
  return "?";
}

ProtocolMessage make_command(MessageName name, std::uint64_t correlation_id, Json payload) {
  return ProtocolMessage{MessageKind::command, name, std::move(payload), kProtocolVersion,
                         correlation_id};
}

ProtocolMessage make_response(MessageName name, std::uint64_t correlation_id, Json payload) {
  return ProtocolMessage{MessageKind::response, name, std::move(payload), kProtocolVersion,
                         correlation_id};
}

std::string encode_message(const ProtocolMessage& msg) {
  if (!msg.payload.is_object()) throw EncodeError("payload", "payload must be an object");
  Json doc = Json::object();
  for (const auto& [key, value] : msg.payload.items()) {
    if (is_envelope_key(key)) throw EncodeError(key, "collides with an envelope key");
    if (auto why = unencodable(Json(key))) throw EncodeError(key, *why);
    if (auto why = unencodable(value)) throw EncodeError(key, *why);
    doc[key] = value;
  }
  doc[std::string(msg.kind == MessageKind::command ? kCommandKey : kResponseKey)] =
      std::string(to_string(msg.name));
  doc[std::string(kCorrelationKey)] = msg.correlation_id;
  doc[std::string(kVersionKey)] = msg.version.str();
  std::string line = canonical_dump(doc);
  line.push_back('\n');
  return line;
}

DecodeResult decode_message(std::string_view line) {
  std::string_view body = line;
  if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
  if (body.size() > kMaxLineBytes) {
    return fail(DecodeFailure::framing, "", "line exceeds 1 MiB", line.substr(0, 256));
  }
  if (body.find('\n') != std::string_view::npos) {
    return fail(DecodeFailure::framing, "", "embedded line break", line);
  }

  Json doc = parse_json_or_discard(body);
  if (doc.is_discarded()) return fail(DecodeFailure::syntax, "", "not a JSON document", line);
  if (!doc.is_object()) return fail(DecodeFailure::syntax, "", "document is not an object", line);

  const bool has_cmd = doc.contains(kCommandKey);
  const bool has_type = doc.contains(kResponseKey);
  if (has_cmd == has_type) {
    return fail(DecodeFailure::schema, "cmd", "exactly one of 'cmd' or 'type' is required", line);
  }
  const std::string name_key(has_cmd ? kCommandKey : kResponseKey);
  const Json& name_value = doc[name_key];
  if (!name_value.is_string()) {
    return fail(DecodeFailure::schema, name_key, "must be a string", line);
  }

  // Version first: a different major may legitimately use names we do not know.
  auto v_it = doc.find(kVersionKey);
  if (v_it == doc.end()) return fail(DecodeFailure::schema, "v", "missing", line);
  if (!v_it->is_string()) return fail(DecodeFailure::schema, "v", "must be a string", line);
  auto version = SemVer::parse(v_it->get<std::string>());
  if (!version) return fail(DecodeFailure::schema, "v", "not a semantic version", line);
  if (version->major != kProtocolVersion.major) {
    return fail(DecodeFailure::version, "v",
                "major version " + std::to_string(version->major) + " unsupported", line);
  }

  auto name = message_name_from_string(name_value.get<std::string>());
  const MessageKind kind = has_cmd ? MessageKind::command : MessageKind::response;
  if (!name || kind_of(*name) != kind) {
    return fail(DecodeFailure::unknown_name, name_key,
                "unknown " + name_key + " '" + name_value.get<std::string>() + "'", line);
  }

  auto id_it = doc.find(kCorrelationKey);
  if (id_it == doc.end()) return fail(DecodeFailure::schema, "correlation_id", "missing", line);
  if (!id_it->is_number_unsigned() && !(id_it->is_number_integer() && id_it->get<std::int64_t>() >= 0)) {
    return fail(DecodeFailure::schema, "correlation_id", "must be a non-negative integer", line);
  }
  const auto correlation_id = id_it->get<std::uint64_t>();
  if (kind == MessageKind::command && correlation_id == 0) {
    return fail(DecodeFailure::schema, "correlation_id", "commands start at 1", line);
  }

  Json payload = Json::object();
  for (auto& [key, value] : doc.items()) {
    if (!is_envelope_key(key)) payload[key] = std::move(value);
  }
  if (auto violation = validate(payload, schema(to_string(*name)))) {
    return fail(DecodeFailure::schema, violation->path, violation->message, line);
  }
  return ProtocolMessage{kind, *name, std::move(payload), *version, correlation_id};
}

namespace {

void expect_name(const ProtocolMessage& msg, MessageName name) {
  if (msg.name != name) {
    throw MosaicError("expected '" + std::string(to_string(name)) + "' response, got '" +
                      std::string(to_string(msg.name)) + "'");
  }
}

}  // namespace

ResponseReady ResponseReady::from_message(const ProtocolMessage& msg) {
  expect_name(msg, MessageName::ready);
  ResponseReady r;
  r.seed = msg.payload.at("seed").get<std::uint64_t>();
  r.observation_shape = msg.payload.at("observation_shape").get<std::vector<std::int64_t>>();
  r.env_metadata = msg.payload.at("env_metadata");
  return r;
}

Json ResponseReady::to_payload() const {
  return Json{{"seed", seed}, {"observation_shape", observation_shape}, {"env_metadata", env_metadata}};
}

ResponseStep ResponseStep::from_message(const ProtocolMessage& msg) {
  expect_name(msg, MessageName::step_result);
  ResponseStep r;
  r.action = msg.payload.at("action").get<std::int64_t>();
  r.reward = Reward::from_double(msg.payload.at("reward").get<double>());
  r.terminated = msg.payload.at("terminated").get<bool>();
  if (auto it = msg.payload.find("render"); it != msg.payload.end() && !it->is_null()) {
    r.render_payload = *it;
  }
  return r;
}

Json ResponseStep::to_payload() const {
  Json p{{"action", action}, {"reward", reward.to_double()}, {"terminated", terminated}};
  if (render_payload) p["render"] = *render_payload;
  return p;
}

ResponseEpisodeEnd ResponseEpisodeEnd::from_message(const ProtocolMessage& msg) {
  expect_name(msg, MessageName::episode_end);
  ResponseEpisodeEnd r;
  r.total_reward = Reward::from_double(msg.payload.at("total_reward").get<double>());
  r.episode_length = msg.payload.at("episode_length").get<std::int64_t>();
  return r;
}

Json ResponseEpisodeEnd::to_payload() const {
  return Json{{"total_reward", total_reward.to_double()}, {"episode_length", episode_length}};
}

}  // namespace mosaic::protocol
