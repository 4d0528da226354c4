#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "mosaic/protocol/message.hpp"

namespace mosaic::protocol {

enum class WorkerKind { rl, llm, vlm, human, baseline };
std::string_view to_string(WorkerKind kind);
std::optional<WorkerKind> worker_kind_from_string(std::string_view text);

enum class Modality { tensor, text, image };
std::string_view to_string(Modality m);
std::optional<Modality> modality_from_string(std::string_view text);

struct CapabilityManifest {
  WorkerKind worker_kind = WorkerKind::baseline;
  std::set<MessageName> supported_commands;
  std::set<Modality> observation_modalities;
  std::uint32_t max_image_history = 0;
  SemVer schema_version = kProtocolVersion;
  std::optional<Json> env_metadata;

  /// Reads the payload of a handshake message. Throws ValidationError.
  static CapabilityManifest from_message(const ProtocolMessage& handshake);
  ProtocolMessage to_message() const;

  /// Invariant violations, empty when the manifest is well formed.
  std::vector<std::string> violations() const;
};

struct NegotiatedSession {
  WorkerKind worker_kind = WorkerKind::baseline;
  std::set<MessageName> commands;
  std::set<Modality> modalities;
  std::uint32_t max_image_history = 0;
  SemVer schema_version = kProtocolVersion;
  Json env_metadata = Json::object();

  bool supports(MessageName command) const { return commands.count(command) != 0; }
};

struct NegotiationError {
  enum class Category { manifest, commands, version, modality };
  struct Unmet {
    Category category;
    std::string detail;
  };
  std::vector<Unmet> unmet;

  std::string describe() const;
};
std::string_view to_string(NegotiationError::Category c);

using NegotiationResult = std::variant<NegotiatedSession, NegotiationError>;

/// Checks the worker's manifest against what the orchestrator requires.
NegotiationResult negotiate(const CapabilityManifest& handshake,
                            const CapabilityManifest& required);

}  // namespace mosaic::protocol
