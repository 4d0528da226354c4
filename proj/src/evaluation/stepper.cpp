#include "mosaic/evaluation/stepper.hpp"

namespace mosaic::evaluation {

using operators::Decision;

namespace {

telemetry::StepRecord record_for(const operators::OperatorHandle& handle, const StepContext& ctx,
                                 std::uint64_t step_index, const std::string& slot, const Decision& d,
                                 const ObservationPayload& obs, const env::Transition& t) {
  telemetry::StepRecord r;
  r.run_id = ctx.run_id;
  r.session_id = ctx.session_id;
  r.episode_index = ctx.episode_index;
  r.step_index = step_index;
  r.slot = slot;
  r.paradigm = std::string(to_string(handle.paradigm(slot)));
  r.action = d.action;
  r.raw_text = d.raw_text;
  if (d.parse_outcome) r.parse_outcome = std::string(to_string(*d.parse_outcome));
  r.reward = t.reward;
  r.terminated = t.terminated;
  r.truncated = t.truncated;
  r.obs_digest = obs.digest();
  return r;
}

}  // namespace

Advance advance(operators::OperatorHandle& handle, const env::EnvState& state, const StepContext& ctx) {
  if (auto blocked = handle.blocked_slots(); !blocked.empty()) {
    if (handle.config().mode == operators::StepMode::parallel) throw operators::BlockedError(std::move(blocked));
    if (std::find(blocked.begin(), blocked.end(), state.turn_slot()) != blocked.end()) {
      throw operators::BlockedError({state.turn_slot()});
    }
  }
  const std::uint64_t step_index = state.step_index;
  const Json info{{"step_index", step_index}};
  Advance out;
  if (handle.config().mode == operators::StepMode::parallel) {
    std::map<std::string, ObservationPayload> observations;
    for (const auto& slot : handle.slots()) observations.emplace(slot, handle.observe(state, slot));
    auto decisions = handle.select_actions(observations, info);
    std::map<std::string, int> actions;
    for (const auto& [slot, d] : decisions) actions[slot] = d.action;
    auto result = env::step_parallel(state, actions);
    out.state = std::move(result.state);
    for (const auto& t : result.transitions) {
      out.records.push_back(record_for(handle, ctx, step_index, t.slot, decisions.at(t.slot), observations.at(t.slot), t));
    }
  } else {
    const std::string slot = state.turn_slot();
    auto obs = handle.observe(state, slot);
    auto d = handle.select_action(slot, obs, info);
    auto result = env::step_aec(state, slot, d.action);
    out.state = std::move(result.state);
    out.records.push_back(record_for(handle, ctx, step_index, slot, d, obs, result.transition));
  }
  out.episode_over = out.state.done();
  if (!out.episode_over && ctx.max_steps && out.state.step_index >= *ctx.max_steps) {
    out.state.truncated = true;
    for (auto& r : out.records) r.truncated = true;
    out.episode_over = true;
  }
  return out;
}

std::string winner_of(const env::EnvState& state) {
  const auto& info = state.info();
  if (info.team_b.empty()) return state.score.at(info.team_a) > 0 ? info.team_a : "draw";
  const auto a = state.score.at(info.team_a);
  const auto b = state.score.at(info.team_b);
  if (a == b) return "draw";
  return a > b ? info.team_a : info.team_b;
}

telemetry::EpisodeRecord summarize_episode(const StepContext& ctx, const env::EnvState& final_state,
                                           const std::vector<std::string>& slots,
                                           const std::vector<telemetry::StepRecord>& records) {
  telemetry::EpisodeRecord e;
  e.run_id = ctx.run_id;
  e.session_id = ctx.session_id;
  e.episode_index = ctx.episode_index;
  e.seed = final_state.seed;
  for (const auto& slot : slots) e.totals[slot] = Reward{};
  for (const auto& r : records) {
    e.totals[r.slot] += r.reward;
    e.episode_length = std::max(e.episode_length, r.step_index + 1);
  }
  e.team_scores = final_state.score;
  e.winner = winner_of(final_state);
  return e;
}

}  // namespace mosaic::evaluation
