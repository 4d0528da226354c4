#pragma once

// Hand-rolled generators for property tests.

#include <cstdint>
#include <random>
#include <string>

#include "mosaic/protocol/message.hpp"
#include "mosaic/util/json.hpp"

namespace mosaic::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng_); }
  bool coin() { return below(2) == 1; }
  std::mt19937_64& engine() { return rng_; }

  /// Valid UTF-8 including escapes, quotes and multi-byte sequences.
  std::string text(std::size_t max_len = 12) {
    static const char* pieces[] = {"a", "Z", "0", " ", "\"", "\\", "\n", "\t", "/", "{", "}",
                                   "\xc3\xa9", "\xe2\x82\xac", "\xf0\x9f\x98\x80", "ACTION:", ",", "\x01"};
    std::string s;
    auto n = below(max_len + 1);
    for (std::uint64_t i = 0; i < n; ++i) s += pieces[below(std::size(pieces))];
    return s;
  }

  std::string key() {
    for (;;) {
      auto k = "k" + text(6);
      if (k != "cmd" && k != "type" && k != "v" && k != "correlation_id") return k;
    }
  }

  Json value(int depth = 0) {
    switch (below(depth > 2 ? 5 : 7)) {
      case 0: return nullptr;
      case 1: return coin();
      case 2: return static_cast<std::int64_t>(below(1u << 31)) - (1 << 30);
      case 3: return std::ldexp(static_cast<double>(below(1u << 20)) - 5e5, static_cast<int>(below(20)) - 10);
      case 4: return text();
      case 5: {
        Json arr = Json::array();
        for (auto i = below(4); i > 0; --i) arr.push_back(value(depth + 1));
        return arr;
      }
      default: {
        Json obj = Json::object();
        for (auto i = below(4); i > 0; --i) obj[key()] = value(depth + 1);
        return obj;
      }
    }
  }

 private:
  std::mt19937_64 rng_;
};

/// A message that satisfies every schema, with random extra keys.
inline protocol::ProtocolMessage valid_message(Gen& g) {
  using protocol::MessageName;
  static const MessageName names[] = {
      MessageName::reset,       MessageName::step,        MessageName::stop,
      MessageName::select_action, MessageName::restore,   MessageName::train,
      MessageName::ready,       MessageName::step_result, MessageName::episode_end,
      MessageName::error,       MessageName::heartbeat,   MessageName::handshake};
  auto name = names[g.below(std::size(names))];
  Json p = Json::object();
  for (auto i = g.below(3); i > 0; --i) p[g.key()] = g.value();
  switch (name) {
    case MessageName::reset: p["seed"] = g.below(1ull << 53); break;
    case MessageName::step: if (g.coin()) p["action"] = g.below(5); break;
    case MessageName::select_action:
      p["agent_id"] = "green_" + std::to_string(g.below(2));
      p["observation"] = Json{{"modality", "text"}, {"text", g.text()}};
      break;
    case MessageName::restore:
      p["state"] = "AAAA";
      p["digest"] = std::string(64, 'a');
      break;
    case MessageName::ready:
      p["seed"] = g.below(1000);
      p["observation_shape"] = Json::array({g.below(9), g.below(9), 3});
      p["env_metadata"] = Json{{"task", "mosaic/Corridor-v1"}};
      break;
    case MessageName::step_result:
      p["action"] = g.below(5);
      p["reward"] = static_cast<double>(static_cast<std::int64_t>(g.below(3)) - 1);
      p["terminated"] = g.coin();
      break;
    case MessageName::episode_end:
      p["total_reward"] = static_cast<double>(g.below(5)) / 4.0;
      p["episode_length"] = 1 + g.below(200);
      break;
    case MessageName::error: p["message"] = g.text(); break;
    case MessageName::handshake:
      p["worker_kind"] = "baseline";
      p["supported_commands"] = Json::array({"reset", "step", "stop"});
      p["observation_modalities"] = Json::array({"tensor"});
      p["max_image_history"] = 0;
      p["schema_version"] = "1.0.0";
      break;
    default: break;
  }
  auto kind = protocol::kind_of(name);
  std::uint64_t id = kind == protocol::MessageKind::command ? 1 + g.below(1u << 30) : g.below(1u << 30);
  return protocol::ProtocolMessage{kind, name, std::move(p),
                                   protocol::SemVer{1, static_cast<int>(g.below(3)), static_cast<int>(g.below(3))},
                                   id};
}

}  // namespace mosaic::testing
