#pragma once

#include <memory>
#include <optional>
#include <string>

#include "mosaic/env/env.hpp"
#include "mosaic/operators/parse.hpp"

namespace mosaic::worker {

enum class PolicyKind { random, noop, cycle, greedy, text };
std::string_view to_string(PolicyKind k);
std::optional<PolicyKind> policy_kind_from_string(std::string_view text);

struct PolicyReply {
  int action = 0;
  std::optional<std::string> text;  // text-emitting policies only
};

/// Decision rule inside a worker process. State beyond the RNG is derived
/// from observations, so the RNG words are the whole checkpoint.
class Policy {
 public:
  Policy(const env::TaskInfo& task, std::string slot) : task_(task), slot_(std::move(slot)) {}
  virtual ~Policy() = default;

  void reset(std::uint64_t seed) { rng_ = Rng(seed); }
  virtual PolicyReply act(const ObservationPayload& obs, std::uint64_t step_index) = 0;
  virtual ObservationModality modality() const { return ObservationModality::tensor; }

  const Rng& rng() const { return rng_; }
  void set_rng(Rng rng) { rng_ = std::move(rng); }

 protected:
  const env::TaskInfo& task_;
  std::string slot_;
  Rng rng_;
};

struct PolicySettings {
  /// Output format of text policies; matches the slot's parse grammar.
  operators::Grammar grammar = operators::Grammar::labeled_keyword;
  /// Probability that a text policy emits an unparseable reply.
  double noise = 0.0;
};

PolicySettings policy_settings_from(const Json& settings);

std::unique_ptr<Policy> make_policy(PolicyKind kind, const env::TaskInfo& task, const std::string& slot,
                                    const PolicySettings& settings = {});

/// Rule used by the greedy and text policies on TeamTag: step toward the
/// nearest opponent along the longer axis (vertical on ties). Offsets are
/// toroidal, dx to the right and dy downward. Returns the TeamTag action.
int chase_action(int dx, int dy);

}  // namespace mosaic::worker
