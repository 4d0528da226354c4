#include "mosaic/protocol/capability.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace mosaic::protocol {

namespace {

constexpr std::array<std::pair<WorkerKind, std::string_view>, 5> kKinds{{
    {WorkerKind::rl, "rl"},
    {WorkerKind::llm, "llm"},
    {WorkerKind::vlm, "vlm"},
    {WorkerKind::human, "human"},
    {WorkerKind::baseline, "baseline"},
}};

constexpr std::array<std::pair<Modality, std::string_view>, 3> kModalities{{
    {Modality::tensor, "tensor"},
    {Modality::text, "text"},
    {Modality::image, "image"},
}};

}  // namespace

std::string_view to_string(WorkerKind kind) {
  for (const auto& [k, s] : kKinds) {
    if (k == kind) return s;
  }
  return "?";
}

std::optional<WorkerKind> worker_kind_from_string(std::string_view text) {
  for (const auto& [k, s] : kKinds) {
    if (s == text) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Modality m) {
  for (const auto& [k, s] : kModalities) {
    if (k == m) return s;
  }
  return "?";
}

std::optional<Modality> modality_from_string(std::string_view text) {
  for (const auto& [k, s] : kModalities) {
    if (s == text) return k;
  }
  return std::nullopt;
}

std::string_view to_string(NegotiationError::Category c) {
  switch (c) {
    case NegotiationError::Category::manifest: return "manifest";
    case NegotiationError::Category::commands: return "commands";
    case NegotiationError::Category::version: return "version";
    case NegotiationError::Category::modality: return "modality";
  }
  return "?";
}

CapabilityManifest CapabilityManifest::from_message(const ProtocolMessage& msg) {
  if (msg.name != MessageName::handshake) {
    throw ValidationError("type", "expected handshake, got " + std::string(to_string(msg.name)));
  }
  const Json& p = msg.payload;
  CapabilityManifest m;
  auto kind = worker_kind_from_string(p.at("worker_kind").get<std::string>());
  if (!kind) throw ValidationError("worker_kind", "unknown worker kind");
  m.worker_kind = *kind;
  for (const auto& c : p.at("supported_commands")) {
    // Unknown command names from newer minors are ignored.
    if (auto name = message_name_from_string(c.get<std::string>());
        name && kind_of(*name) == MessageKind::command) {
      m.supported_commands.insert(*name);
    }
  }
  for (const auto& mod : p.at("observation_modalities")) {
    auto parsed = modality_from_string(mod.get<std::string>());
    if (!parsed) throw ValidationError("observation_modalities", "unknown modality " + mod.dump());
    m.observation_modalities.insert(*parsed);
  }
  m.max_image_history = p.at("max_image_history").get<std::uint32_t>();
  auto version = SemVer::parse(p.at("schema_version").get<std::string>());
  if (!version) throw ValidationError("schema_version", "not a semantic version");
  m.schema_version = *version;
  if (auto it = p.find("env_metadata"); it != p.end()) m.env_metadata = *it;
  return m;
}

ProtocolMessage CapabilityManifest::to_message() const {
  Json commands = Json::array();
  for (auto c : supported_commands) commands.push_back(std::string(to_string(c)));
  Json modalities = Json::array();
  for (auto m : observation_modalities) modalities.push_back(std::string(to_string(m)));
  Json payload{{"worker_kind", std::string(to_string(worker_kind))},
               {"supported_commands", std::move(commands)},
               {"observation_modalities", std::move(modalities)},
               {"max_image_history", max_image_history},
               {"schema_version", schema_version.str()}};
  if (env_metadata) payload["env_metadata"] = *env_metadata;
  return make_response(MessageName::handshake, 0, std::move(payload));
}

std::vector<std::string> CapabilityManifest::violations() const {
  std::vector<std::string> out;
  if (!supported_commands.count(MessageName::reset)) out.emplace_back("supported_commands lacks reset");
  if (!supported_commands.count(MessageName::stop)) out.emplace_back("supported_commands lacks stop");
  if (max_image_history > 0 && !observation_modalities.count(Modality::image)) {
    out.emplace_back("max_image_history > 0 requires the image modality");
  }
  return out;
}

std::string NegotiationError::describe() const {
  std::string out;
  for (const auto& u : unmet) {
    if (!out.empty()) out += "; ";
    out += std::string(to_string(u.category)) + ": " + u.detail;
  }
  return out;
}

NegotiationResult negotiate(const CapabilityManifest& handshake,
                            const CapabilityManifest& required) {
  NegotiationError err;
  using Cat = NegotiationError::Category;

  for (const auto& v : handshake.violations()) err.unmet.push_back({Cat::manifest, v});

  if (handshake.schema_version.major != required.schema_version.major) {
    err.unmet.push_back({Cat::version, "worker schema " + handshake.schema_version.str() +
                                           " incompatible with " + required.schema_version.str()});
  }
  for (auto c : required.supported_commands) {
    if (!handshake.supported_commands.count(c)) {
      err.unmet.push_back({Cat::commands, "missing command " + std::string(to_string(c))});
    }
  }
  for (auto m : required.observation_modalities) {
    if (!handshake.observation_modalities.count(m)) {
      err.unmet.push_back({Cat::modality, "missing modality " + std::string(to_string(m))});
    }
  }
  if (required.max_image_history > handshake.max_image_history) {
    err.unmet.push_back({Cat::modality, "image history " + std::to_string(required.max_image_history) +
                                            " exceeds worker limit " +
                                            std::to_string(handshake.max_image_history)});
  }
  if (!err.unmet.empty()) return err;

  NegotiatedSession s;
  s.worker_kind = handshake.worker_kind;
  s.commands = handshake.supported_commands;
  std::set_intersection(handshake.observation_modalities.begin(),
                        handshake.observation_modalities.end(),
                        required.observation_modalities.begin(),
                        required.observation_modalities.end(),
                        std::inserter(s.modalities, s.modalities.begin()));
  if (required.observation_modalities.empty()) s.modalities = handshake.observation_modalities;
  // The worker accepts at least what was asked; the session uses the request.
  s.max_image_history = required.max_image_history;
  s.schema_version = std::min(handshake.schema_version, required.schema_version);
  if (handshake.env_metadata) s.env_metadata = *handshake.env_metadata;
  return s;
}

}  // namespace mosaic::protocol
