#include <algorithm>

#include "mosaic/env/env.hpp"

namespace mosaic::env {

namespace {

constexpr std::int64_t kTagScoreLimit = 10;

bool is_corridor(const EnvState& s) { return s.task_id == kCorridorTask; }

int wrap(int v, int n) { return ((v % n) + n) % n; }

std::optional<std::string> occupant(const EnvState& s, Pos p) {
  for (const auto& [slot, pos] : s.agent_positions) {
    if (pos == p) return slot;
  }
  return std::nullopt;
}

Pos draw_free_cell(EnvState& s) {
  const auto cells = static_cast<std::uint64_t>(s.width * s.height);
  for (;;) {
    auto idx = static_cast<int>(s.rng.uniform_below(cells));
    Pos p{idx % s.width, idx / s.width};
    if (!occupant(s, p)) return p;
  }
}

struct MoveOutcome {
  std::map<std::string, Reward> rewards;
  Json info = Json::object();
};

// Corridor: stay / forward / back along a one-row hallway, reward 1 on
// entering the goal cell at the east end.
void corridor_move(EnvState& s, const std::string& slot, int action, MoveOutcome& out) {
  Pos& pos = s.agent_positions.at(slot);
  if (action == 1) pos.x = std::min(pos.x + 1, s.width - 1);
  if (action == 2) pos.x = std::max(pos.x - 1, 0);
  if (action == 2) s.agent_orientations[slot] = Direction::west;
  if (action == 1) s.agent_orientations[slot] = Direction::east;
  const bool at_goal = s.grid[static_cast<std::size_t>(pos.y * s.width + pos.x)] == Cell::goal;
  Reward r = at_goal ? Reward::from_int(1) : Reward{};
  out.rewards[slot] += r;
  s.score[s.team_of.at(slot)] += at_goal ? 1 : 0;
  if (at_goal) s.terminated = true;
}

// TeamTag: toroidal moves resolved one agent at a time. `immune` holds
// agents tagged earlier in the same simultaneous step; they neither act nor
// can be entered again.
void teamtag_move(EnvState& s, const std::string& slot, int action, std::set<std::string>& immune,
                  MoveOutcome& out) {
  if (immune.count(slot)) {
    out.info["voided"].push_back(slot);
    return;
  }
  if (action == 0) return;
  static constexpr int kDx[] = {0, 0, 0, -1, 1};
  static constexpr int kDy[] = {0, -1, 1, 0, 0};
  static constexpr Direction kDir[] = {Direction::north, Direction::north, Direction::south,
                                       Direction::west, Direction::east};
  s.agent_orientations[slot] = kDir[action];
  Pos& pos = s.agent_positions.at(slot);
  Pos target{wrap(pos.x + kDx[action], s.width), wrap(pos.y + kDy[action], s.height)};
  auto other = occupant(s, target);
  if (!other) {
    pos = target;
    return;
  }
  const auto& my_team = s.team_of.at(slot);
  if (s.team_of.at(*other) == my_team || immune.count(*other)) {
    out.info["blocked"].push_back(slot);
    return;
  }
  // Tag: the mover takes the cell, the opponent respawns on a seeded free cell.
  pos = target;
  s.agent_positions.at(*other) = draw_free_cell(s);
  immune.insert(*other);
  out.rewards[slot] += Reward::from_int(1);
  s.score[my_team] += 1;
  out.info["tags"].push_back(Json{{"tagger", slot}, {"tagged", *other}});
  if (s.score[my_team] >= kTagScoreLimit) s.terminated = true;
}

void check_action(const TaskInfo& info, const std::string& slot, int action) {
  if (action < 0 || action >= info.num_actions()) {
    throw StepError("actions." + slot, "action " + std::to_string(action) + " outside [0, " +
                                           std::to_string(info.num_actions()) + ")");
  }
}

void finish_step(EnvState& s) {
  ++s.step_index;
  if (!s.terminated && s.step_index >= static_cast<std::uint64_t>(s.info().horizon)) {
    s.truncated = true;
  }
}

Transition make_transition(const EnvState& s, const std::string& slot, Reward reward,
                           const ObservationSpecs& specs, const Json& info) {
  ObservationOptions opts;
  if (auto it = specs.find(slot); it != specs.end()) opts = it->second;
  Transition t;
  t.slot = slot;
  t.observation = serialize_obs(s, slot, opts);
  t.reward = reward;
  t.terminated = s.terminated;
  t.truncated = s.truncated;
  t.info = info;
  t.info["step_index"] = s.step_index;
  return t;
}

}  // namespace

EnvState make_env(std::string_view task_id, std::uint64_t seed, std::uint64_t episode_index) {
  const TaskInfo& info = task_info(task_id);
  EnvState s;
  s.task_id = info.task_id;
  s.seed = seed;
  s.width = info.width;
  s.height = info.height;
  s.grid.assign(static_cast<std::size_t>(info.width * info.height), Cell::empty);
  s.episode_index = episode_index;
  s.rng = Rng(seed);
  if (task_id == kCorridorTask) {
    s.grid.back() = Cell::goal;
    s.agent_positions["agent_0"] = Pos{0, 0};
    s.agent_orientations["agent_0"] = Direction::east;
    s.team_of["agent_0"] = info.team_a;
    s.score[info.team_a] = 0;
  } else {
    s.score[info.team_a] = 0;
    s.score[info.team_b] = 0;
    for (const auto& slot : info.slots) {
      s.team_of[slot] = slot.rfind(info.team_a, 0) == 0 ? info.team_a : info.team_b;
      s.agent_orientations[slot] = Direction::north;
    }
    for (const auto& slot : info.slots) {
      s.agent_positions[slot] = draw_free_cell(s);
    }
  }
  return s;
}

ParallelStep step_parallel(const EnvState& state, const std::map<std::string, int>& actions,
                           const ObservationSpecs& specs) {
  if (state.done()) throw StateError("episode finished; reset required");
  const TaskInfo& info = state.info();
  for (const auto& slot : info.slots) {
    auto it = actions.find(slot);
    if (it == actions.end()) throw StepError("actions", "missing action for slot " + slot);
    check_action(info, slot, it->second);
  }
  for (const auto& [slot, _] : actions) {
    if (!state.agent_positions.count(slot)) throw StepError("actions", "unknown slot " + slot);
  }

  EnvState next = state;
  MoveOutcome out;
  std::set<std::string> immune;
  for (const auto& slot : info.slots) {
    if (next.terminated) break;
    if (is_corridor(next)) {
      corridor_move(next, slot, actions.at(slot), out);
    } else {
      teamtag_move(next, slot, actions.at(slot), immune, out);
    }
  }
  finish_step(next);

  ParallelStep result{std::move(next), {}};
  for (const auto& slot : info.slots) {
    Reward r = out.rewards.count(slot) ? out.rewards.at(slot) : Reward{};
    result.transitions.push_back(make_transition(result.state, slot, r, specs, out.info));
  }
  return result;
}

AecStep step_aec(const EnvState& state, std::string_view slot, int action,
                 const ObservationSpecs& specs) {
  if (state.done()) throw StateError("episode finished; reset required");
  const TaskInfo& info = state.info();
  const std::string& expected = state.turn_slot();
  if (slot != expected) {
    throw StateError("out-of-turn action from " + std::string(slot) + "; expected " + expected);
  }
  check_action(info, expected, action);

  EnvState next = state;
  MoveOutcome out;
  std::set<std::string> immune;
  if (is_corridor(next)) {
    corridor_move(next, expected, action, out);
  } else {
    teamtag_move(next, expected, action, immune, out);
  }
  next.turn = (next.turn + 1) % static_cast<std::uint32_t>(info.slots.size());
  if (next.turn == 0 || next.terminated) {
    // A terminated episode closes the cycle early.
    if (next.turn == 0) {
      finish_step(next);
    } else {
      ++next.step_index;
      next.turn = 0;
    }
  }
  Json rewards = Json::object();
  for (const auto& [s, r] : out.rewards) rewards[s] = r.to_double();
  out.info["rewards"] = rewards;
  Reward mine = out.rewards.count(expected) ? out.rewards.at(expected) : Reward{};
  AecStep result{std::move(next), {}, {}, out.rewards};
  result.transition = make_transition(result.state, expected, mine, specs, out.info);
  result.next_slot = result.state.turn_slot();
  return result;
}

}  // namespace mosaic::env
