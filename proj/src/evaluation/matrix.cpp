#include "mosaic/evaluation/matrix.hpp"

#include <algorithm>
#include <fstream>

namespace mosaic::evaluation {

using operators::Paradigm;
using operators::WorkerAssignment;

namespace {

// One team member of a table row.
enum class Member { rl, rl_co_trained, llm, vlm, rho, nu };

struct Row {
  const char* id;
  std::vector<Member> team_a;
  std::vector<Member> team_b;
  const char* purpose;
};

const std::vector<Row>& adversarial_rows() {
  static const std::vector<Row> rows{
      {"A1", {Member::rl, Member::rl}, {Member::rl, Member::rl}, "Homogeneous RL baseline"},
      {"A2", {Member::llm, Member::llm}, {Member::llm, Member::llm}, "Homogeneous LLM baseline"},
      {"A3", {Member::vlm, Member::vlm}, {Member::vlm, Member::vlm}, "Homogeneous VLM baseline"},
      {"A4", {Member::rl, Member::rl}, {Member::llm, Member::llm}, "Cross-paradigm (RL vs LLM)"},
      {"A5", {Member::rl, Member::rl}, {Member::vlm, Member::vlm}, "Cross-paradigm (RL vs VLM)"},
      {"A6", {Member::llm, Member::llm}, {Member::vlm, Member::vlm}, "Cross-paradigm (LLM vs VLM)"},
      {"A7", {Member::rl, Member::rl}, {Member::rho, Member::rho}, "Sanity check (trained vs random)"},
  };
  return rows;
}

const std::vector<Row>& cooperative_rows() {
  static const std::vector<Row> rows{
      {"C1", {Member::rl, Member::llm}, {Member::rl, Member::rho}, "Does the LLM outperform rho as teammate?"},
      {"C2", {Member::rl, Member::llm}, {Member::rl, Member::nu}, "Does the LLM actively contribute?"},
      {"C3", {Member::rl, Member::vlm}, {Member::rl, Member::rho}, "Does the VLM outperform rho as teammate?"},
      {"C4", {Member::rl, Member::vlm}, {Member::rl, Member::nu}, "Does the VLM actively contribute?"},
      {"C5", {Member::rl, Member::rl}, {Member::rl, Member::rl}, "Solo-pair baseline (no co-training)"},
      {"C6", {Member::rl, Member::llm}, {Member::rl_co_trained, Member::rl_co_trained},
       "Can zero-shot LLM teaming match co-training?"},
      {"C7", {Member::rl, Member::vlm}, {Member::rl_co_trained, Member::rl_co_trained},
       "Can zero-shot VLM teaming match co-training?"},
      {"C8", {Member::rl, Member::llm}, {Member::rl, Member::vlm}, "LLM vs VLM as heterogeneous teammates"},
  };
  return rows;
}

std::optional<Paradigm> pooled_paradigm(Member m) {
  switch (m) {
    case Member::rl:
    case Member::rl_co_trained: return Paradigm::rl;
    case Member::llm: return Paradigm::llm;
    case Member::vlm: return Paradigm::vlm;
    case Member::rho:
    case Member::nu: return std::nullopt;
  }
  return std::nullopt;
}

WorkerAssignment assignment_for(Member m, const std::string& slot) {
  WorkerAssignment a;
  a.agent_slot = slot;
  switch (m) {
    case Member::rl:
    case Member::rl_co_trained:
      a.worker_type = Paradigm::rl;
      a.settings = Json{{"algorithm", "greedy"}, {"training", m == Member::rl ? "solo" : "co_trained"}};
      a.frozen = true;
      break;
    case Member::llm:
      a.worker_type = Paradigm::llm;
      a.settings = Json{{"model_id", "scripted"}, {"temperature", 0}};
      break;
    case Member::vlm:
      a.worker_type = Paradigm::vlm;
      a.settings = Json{{"model_id", "scripted"}, {"temperature", 0}, {"max_image_history", 2}};
      break;
    case Member::rho:
      a.worker_type = Paradigm::baseline;
      a.settings = Json{{"kind", "random"}};
      break;
    case Member::nu:
      a.worker_type = Paradigm::baseline;
      a.settings = Json{{"kind", "noop"}};
      break;
  }
  return a;
}

std::string symbol(const WorkerAssignment& a) {
  if (a.worker_type != Paradigm::baseline) return std::string(to_string(a.worker_type));
  switch (a.baseline_kind()) {
    case operators::BaselineKind::random: return "rho";
    case operators::BaselineKind::noop: return "nu";
    case operators::BaselineKind::cycle: return "cycle";
  }
  return "?";
}

}  // namespace

std::string_view to_string(Family f) { return f == Family::adversarial ? "adversarial" : "cooperative"; }

std::optional<Family> family_from_string(std::string_view text) {
  if (text == "adversarial") return Family::adversarial;
  if (text == "cooperative") return Family::cooperative;
  return std::nullopt;
}

InfeasibleMatrix::InfeasibleMatrix(std::vector<std::string> rows)
    : ValidationError("pools", [&] {
        std::string msg = "pools cannot staff rows";
        for (const auto& r : rows) msg += " " + r;
        return msg;
      }()),
      rows_(std::move(rows)) {}

std::vector<MatrixEntry> build_matrix(const MatrixSpec& spec) {
  const auto& info = env::task_info(spec.task);
  if (info.team_b.empty()) throw ValidationError("task", "matrix rows need a two-team task");
  auto partition = env::make_env(spec.task, spec.seed).partition();
  if (spec.n_a + spec.n_b != spec.n || partition.size_a() != spec.n_a || partition.size_b() != spec.n_b) {
    throw ValidationError("n", "task " + spec.task + " does not have the requested team sizes");
  }
  const auto& rows = spec.family == Family::adversarial ? adversarial_rows() : cooperative_rows();

  std::vector<std::string> blocked;
  for (const auto& row : rows) {
    std::map<Paradigm, std::size_t> need;
    for (const auto* team : {&row.team_a, &row.team_b}) {
      for (auto m : *team) {
        if (auto p = pooled_paradigm(m)) ++need[*p];
      }
    }
    for (const auto& [p, count] : need) {
      auto it = spec.pools.find(p);
      if (it == spec.pools.end() || it->second < count) {
        blocked.push_back(row.id);
        break;
      }
    }
  }
  if (!blocked.empty()) throw InfeasibleMatrix(std::move(blocked));

  std::vector<MatrixEntry> out;
  for (const auto& row : rows) {
    if (row.team_a.size() != spec.n_a || row.team_b.size() != spec.n_b) {
      throw ValidationError("n", std::string(row.id) + " is defined for two teams of two");
    }
    operators::RunConfig c;
    c.operator_id = row.id;
    c.task = spec.task;
    c.seed = spec.seed;
    c.episodes = spec.episodes;
    auto place = [&](const std::set<std::string>& slots, const std::vector<Member>& members) {
      std::size_t i = 0;
      for (const auto& slot : slots) c.player_workers[slot] = assignment_for(members[i++], slot);
    };
    place(partition.team_a, row.team_a);
    place(partition.team_b, row.team_b);
    // Round-trip through the validator so every emitted document is legal.
    out.push_back(MatrixEntry{row.id, row.purpose, operators::RunConfig::from_json(c.to_json())});
  }
  return out;
}

std::map<std::string, std::vector<std::string>> team_composition(const operators::RunConfig& config) {
  auto state = env::make_env(config.task, config.seed);
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [slot, a] : config.player_workers) out[state.team_of.at(slot)].push_back(symbol(a));
  for (auto& [_, members] : out) std::sort(members.begin(), members.end());
  return out;
}

std::vector<std::filesystem::path> write_matrix(const std::filesystem::path& dir,
                                                const std::vector<MatrixEntry>& entries) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> out;
  for (const auto& e : entries) {
    auto path = dir / (e.id + ".config");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << e.config.to_json().dump(2) << "\n";
    if (!f) throw MosaicError("cannot write " + path.string());
    out.push_back(path);
  }
  return out;
}

}  // namespace mosaic::evaluation
