#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mosaic/operators/handle.hpp"
#include "mosaic/telemetry/records.hpp"

namespace mosaic::evaluation {

struct StepContext {
  std::string run_id;
  std::string session_id;
  std::uint64_t episode_index = 0;
  /// Episode budget below the env horizon; reaching it truncates.
  std::optional<std::uint64_t> max_steps;
};

struct Advance {
  env::EnvState state;
  /// One record per slot that acted, in canonical slot order.
  std::vector<telemetry::StepRecord> records;
  bool episode_over = false;
};

/// One env step driven by the handle: a joint action in parallel mode, the
/// turn holder's action in AEC mode. Throws BlockedError before observing
/// anything when a human slot has no pending action.
Advance advance(operators::OperatorHandle& handle, const env::EnvState& state, const StepContext& ctx);

/// Closing summary of an episode from its records and final state.
telemetry::EpisodeRecord summarize_episode(const StepContext& ctx, const env::EnvState& final_state,
                                           const std::vector<std::string>& slots,
                                           const std::vector<telemetry::StepRecord>& records);

/// Team with the strictly highest score, else "draw". A single-team task is
/// won by scoring at all.
std::string winner_of(const env::EnvState& state);

}  // namespace mosaic::evaluation
