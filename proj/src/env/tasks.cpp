#include <algorithm>

#include "mosaic/env/env.hpp"

namespace mosaic::env {

namespace {

std::vector<TaskInfo> build_registry() {
  TaskInfo corridor;
  corridor.task_id = std::string(kCorridorTask);
  corridor.slots = {"agent_0"};
  corridor.action_labels = {"stay", "forward", "back"};
  corridor.null_action = 0;
  corridor.width = 5;
  corridor.height = 1;
  corridor.horizon = 4 * corridor.width;
  corridor.tensor_shape = {1, corridor.width, 2};
  corridor.team_a = "solo";

  TaskInfo tag;
  tag.task_id = std::string(kTeamTagTask);
  tag.slots = {"blue_0", "blue_1", "green_0", "green_1"};
  tag.action_labels = {"stay", "up", "down", "left", "right"};
  tag.null_action = 0;
  tag.width = 7;
  tag.height = 7;
  tag.horizon = 200;
  tag.tensor_shape = {7, 7, 3};
  tag.team_a = "green";
  tag.team_b = "blue";

  return {corridor, tag};
}

const std::vector<TaskInfo>& registry() {
  static const auto tasks = build_registry();
  return tasks;
}

}  // namespace

Json TaskInfo::metadata() const {
  Json teams = Json::array({team_a});
  if (!team_b.empty()) teams.push_back(team_b);
  return Json{{"task", task_id},
              {"slots", slots},
              {"n_actions", num_actions()},
              {"action_labels", action_labels},
              {"null_action", null_action},
              {"width", width},
              {"height", height},
              {"horizon", horizon},
              {"observation_shape", tensor_shape},
              {"teams", std::move(teams)}};
}

const TaskInfo& task_info(std::string_view task_id) {
  for (const auto& t : registry()) {
    if (t.task_id == task_id) return t;
  }
  throw UnknownTaskError(task_id);
}

std::vector<std::string> registered_tasks() {
  std::vector<std::string> out;
  for (const auto& t : registry()) out.push_back(t.task_id);
  return out;
}

std::string_view to_string(ObservationMode m) {
  return m == ObservationMode::egocentric ? "egocentric" : "visible_teammates";
}

std::optional<ObservationMode> observation_mode_from_string(std::string_view text) {
  if (text == "egocentric") return ObservationMode::egocentric;
  if (text == "visible_teammates") return ObservationMode::visible_teammates;
  return std::nullopt;
}

TeamPartition EnvState::partition() const {
  TeamPartition p;
  const auto& ti = info();
  for (const auto& [slot, team] : team_of) {
    (team == ti.team_a ? p.team_a : p.team_b).insert(slot);
  }
  return p;
}

}  // namespace mosaic::env
