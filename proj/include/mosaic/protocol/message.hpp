#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mosaic/protocol/version.hpp"
#include "mosaic/util/errors.hpp"
#include "mosaic/util/json.hpp"
#include "mosaic/util/reward.hpp"

namespace mosaic::protocol {

enum class MessageKind { command, response };

enum class MessageName {
  // commands
  reset,
  step,
  stop,
  select_action,
  restore,
  train,
  // responses
  ready,
  step_result,
  episode_end,
  error,
  heartbeat,
  handshake,
};

std::string_view to_string(MessageName name);
std::optional<MessageName> message_name_from_string(std::string_view text);
MessageKind kind_of(MessageName name);

/// Hard cap on a single framed line, terminator excluded.
inline constexpr std::size_t kMaxLineBytes = 1u << 20;

/// One framed command or response. The payload holds every key of the wire
/// document except the envelope keys ("cmd"/"type", "correlation_id", "v"),
/// including keys this build does not know about.
struct ProtocolMessage {
  MessageKind kind = MessageKind::command;
  MessageName name = MessageName::reset;
  Json payload = Json::object();
  SemVer version = kProtocolVersion;
  std::uint64_t correlation_id = 0;

  friend bool operator==(const ProtocolMessage&, const ProtocolMessage&) = default;
};

ProtocolMessage make_command(MessageName name, std::uint64_t correlation_id,
                             Json payload = Json::object());
ProtocolMessage make_response(MessageName name, std::uint64_t correlation_id,
                              Json payload = Json::object());

class EncodeError : public MosaicError {
 public:
  EncodeError(std::string key, const std::string& detail)
      : MosaicError("cannot encode key '" + key + "': " + detail), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Serializes to a single canonical line including the trailing '\n'.
/// Throws EncodeError naming the first payload key that cannot be written
/// (invalid UTF-8, non-finite number, envelope-key collision).
std::string encode_message(const ProtocolMessage& msg);

enum class DecodeFailure { framing, syntax, unknown_name, schema, version };
std::string_view to_string(DecodeFailure failure);

struct DecodeError {
  DecodeFailure failure = DecodeFailure::syntax;
  std::string field;   // offending field for schema failures
  std::string detail;
  std::string raw_line;
};

using DecodeResult = std::variant<ProtocolMessage, DecodeError>;

/// Total over arbitrary input: never throws, returns a validated message or
/// a classified error. A single trailing "\n" or "\r\n" is accepted.
DecodeResult decode_message(std::string_view line);

// Typed views over response payloads. from_message throws MosaicError when
// the message has a different name.

struct ResponseReady {
  std::uint64_t seed = 0;
  std::vector<std::int64_t> observation_shape;
  Json env_metadata = Json::object();

  static ResponseReady from_message(const ProtocolMessage& msg);
  Json to_payload() const;
};

struct ResponseStep {
  std::int64_t action = 0;
  Reward reward;
  bool terminated = false;
  std::optional<Json> render_payload;

  static ResponseStep from_message(const ProtocolMessage& msg);
  Json to_payload() const;
};

struct ResponseEpisodeEnd {
  Reward total_reward;
  std::int64_t episode_length = 0;

  static ResponseEpisodeEnd from_message(const ProtocolMessage& msg);
  Json to_payload() const;
};

}  // namespace mosaic::protocol
