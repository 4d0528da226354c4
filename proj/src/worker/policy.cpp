#include "mosaic/worker/policy.hpp"

#include <cmath>
#include <cstdlib>
#include <regex>

#include "mosaic/operators/config.hpp"

namespace mosaic::worker {

namespace {

using operators::BaselineKind;
using operators::Grammar;

operators::ActionSpace space_of(const env::TaskInfo& task) {
  return {task.num_actions(), task.action_labels, task.null_action};
}

class BaselinePolicy final : public Policy {
 public:
  BaselinePolicy(const env::TaskInfo& task, std::string slot, BaselineKind kind)
      : Policy(task, std::move(slot)), kind_(kind) {}
  PolicyReply act(const ObservationPayload&, std::uint64_t step_index) override {
    return {operators::baseline_action(kind_, space_of(task_), step_index, rng_), std::nullopt};
  }

 private:
  BaselineKind kind_;
};

struct Offset {
  int dx = 0;
  int dy = 0;
  int distance() const { return std::abs(dx) + std::abs(dy); }
};

// Scripted stand-in for a trained RL policy: reads the tensor view.
class GreedyPolicy final : public Policy {
 public:
  using Policy::Policy;
  PolicyReply act(const ObservationPayload& obs, std::uint64_t) override {
    if (task_.task_id == env::kCorridorTask) return {1, std::nullopt};
    const auto& t = obs.tensor.value();
    const int h = static_cast<int>(t.shape[0]);
    const int w = static_cast<int>(t.shape[1]);
    std::optional<Offset> best;
    for (int row = 0; row < h; ++row) {
      for (int col = 0; col < w; ++col) {
        if (t.data[static_cast<std::size_t>((row * w + col) * 3 + 2)] == 0.0f) continue;
        Offset o{col - w / 2, row - h / 2};
        if (!best || o.distance() < best->distance()) best = o;
      }
    }
    return {best ? chase_action(best->dx, best->dy) : 0, std::nullopt};
  }
};

// Scripted stand-in for a language model: reads the v1 text templates and
// answers in the configured output grammar.
class TextPolicy final : public Policy {
 public:
  TextPolicy(const env::TaskInfo& task, std::string slot, PolicySettings settings)
      : Policy(task, std::move(slot)), settings_(settings) {}

  ObservationModality modality() const override { return ObservationModality::text; }

  PolicyReply act(const ObservationPayload& obs, std::uint64_t) override {
    const std::string text = obs.text.value_or("");
    auto [action, reason] = decide(text);
    if (settings_.noise > 0.0) {
      // 2^-53 resolution is plenty for a probability.
      double u = static_cast<double>(rng_.next() >> 11) * 0x1.0p-53;
      if (u < settings_.noise) return {action, std::string("Let me think about the board for a moment.")};
    }
    return {action, render(action, reason)};
  }

 private:
  std::pair<int, std::string> decide(const std::string& text) const {
    if (task_.task_id == env::kCorridorTask) {
      if (text.find("You are at the goal.") != std::string::npos) return {0, "I am standing on the goal."};
      static const std::regex ahead(R"(the goal (\d+) steps? ahead)");
      std::smatch m;
      if (std::regex_search(text, m, ahead)) return {1, "The goal is " + m[1].str() + " ahead, so I walk on."};
      return {0, "I cannot see the goal."};
    }
    static const std::regex opponent(
        R"(You see an opponent (?:(\d+) steps? (up|down))?(?: and )?(?:(\d+) steps? (left|right))?\.)");
    std::optional<Offset> best;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), opponent); it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      Offset o;
      if (m[1].matched) o.dy = std::stoi(m[1].str()) * (m[2].str() == "up" ? -1 : 1);
      if (m[3].matched) o.dx = std::stoi(m[3].str()) * (m[4].str() == "left" ? -1 : 1);
      if (!best || o.distance() < best->distance()) best = o;
    }
    if (!best) return {0, "No opponent in sight."};
    return {chase_action(best->dx, best->dy), "The nearest opponent is " + std::to_string(best->distance()) +
                                                  " steps away; I close in."};
  }

  std::string render(int action, const std::string& reason) const {
    const std::string& label = task_.action_labels.at(static_cast<std::size_t>(action));
    switch (settings_.grammar) {
      case Grammar::strict_integer: return std::to_string(action);
      case Grammar::json_field: return canonical_dump(Json{{"thought", reason}, {"action", label}});
      case Grammar::labeled_keyword: break;
    }
    return reason + " ACTION: " + label;
  }

  PolicySettings settings_;
};

}  // namespace

int chase_action(int dx, int dy) {
  if (dx == 0 && dy == 0) return 0;
  if (std::abs(dy) >= std::abs(dx)) return dy < 0 ? 1 : 2;
  return dx < 0 ? 3 : 4;
}

std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::random: return "random";
    case PolicyKind::noop: return "noop";
    case PolicyKind::cycle: return "cycle";
    case PolicyKind::greedy: return "greedy";
    case PolicyKind::text: return "text";
  }
  return "?";
}

std::optional<PolicyKind> policy_kind_from_string(std::string_view text) {
  for (auto k : {PolicyKind::random, PolicyKind::noop, PolicyKind::cycle, PolicyKind::greedy, PolicyKind::text}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

PolicySettings policy_settings_from(const Json& settings) {
  PolicySettings s;
  if (auto it = settings.find("grammar"); it != settings.end() && it->is_string()) {
    s.grammar = operators::grammar_from_string(it->get<std::string>()).value_or(s.grammar);
  }
  if (auto it = settings.find("noise"); it != settings.end() && it->is_number()) s.noise = it->get<double>();
  return s;
}

std::unique_ptr<Policy> make_policy(PolicyKind kind, const env::TaskInfo& task, const std::string& slot,
                                    const PolicySettings& settings) {
  switch (kind) {
    case PolicyKind::random: return std::make_unique<BaselinePolicy>(task, slot, BaselineKind::random);
    case PolicyKind::noop: return std::make_unique<BaselinePolicy>(task, slot, BaselineKind::noop);
    case PolicyKind::cycle: return std::make_unique<BaselinePolicy>(task, slot, BaselineKind::cycle);
    case PolicyKind::greedy: return std::make_unique<GreedyPolicy>(task, slot);
    case PolicyKind::text: return std::make_unique<TextPolicy>(task, slot, settings);
  }
  throw ValidationError("kind", "unknown policy kind");
}

}  // namespace mosaic::worker
