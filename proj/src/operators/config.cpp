#include "mosaic/operators/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "mosaic/protocol/schema.hpp"
#include "mosaic/util/digest.hpp"

namespace mosaic::operators {

namespace {

constexpr std::uint32_t kDefaultVlmImageHistory = 2;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

void check_settings(const std::string& path, Paradigm p, const Json& settings, std::vector<ConfigIssue>& out) {
  auto string_in = [&](const char* key, auto parse) {
    if (auto it = settings.find(key); it != settings.end()) {
      if (!it->is_string() || !parse(it->template get<std::string>())) {
        out.push_back({join(path, key), "unsupported value " + it->dump()});
      }
    }
  };
  if (p == Paradigm::baseline) {
    string_in("kind", [](const std::string& s) { return baseline_kind_from_string(s).has_value(); });
  }
  string_in("grammar", [](const std::string& s) { return grammar_from_string(s).has_value(); });
  string_in("fallback", [](const std::string& s) { return fallback_from_string(s).has_value(); });
  string_in("observation_mode", [](const std::string& s) { return env::observation_mode_from_string(s).has_value(); });
  if (auto it = settings.find("max_image_history"); it != settings.end()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
      out.push_back({join(path, "max_image_history"), "must be a non-negative integer"});
    } else if (p == Paradigm::vlm && it->get<std::int64_t>() == 0) {
      out.push_back({join(path, "max_image_history"), "must be positive for VLM slots"});
    } else if (p != Paradigm::vlm && it->get<std::int64_t>() > 0) {
      out.push_back({join(path, "max_image_history"), "only VLM slots receive images"});
    }
  }
  if (auto it = settings.find("executable"); it != settings.end() && !it->is_string()) {
    out.push_back({join(path, "executable"), "must be a path string"});
  }
  if (auto it = settings.find("args"); it != settings.end()) {
    bool ok = it->is_array() && std::all_of(it->begin(), it->end(), [](const Json& a) { return a.is_string(); });
    if (!ok) out.push_back({join(path, "args"), "must be a list of strings"});
  }
}

}  // namespace

std::string_view to_string(Paradigm p) {
  switch (p) {
    case Paradigm::rl: return "RL";
    case Paradigm::llm: return "LLM";
    case Paradigm::vlm: return "VLM";
    case Paradigm::human: return "Human";
    case Paradigm::baseline: return "Baseline";
  }
  return "?";
}

std::string_view config_name(Paradigm p) {
  switch (p) {
    case Paradigm::rl: return "rl";
    case Paradigm::llm: return "llm";
    case Paradigm::vlm: return "vlm";
    case Paradigm::human: return "human";
    case Paradigm::baseline: return "baseline";
  }
  return "?";
}

std::optional<Paradigm> paradigm_from_string(std::string_view text) {
  const auto l = lower(text);
  for (auto p : {Paradigm::rl, Paradigm::llm, Paradigm::vlm, Paradigm::human, Paradigm::baseline}) {
    if (config_name(p) == l) return p;
  }
  return std::nullopt;
}

protocol::WorkerKind worker_kind(Paradigm p) {
  switch (p) {
    case Paradigm::rl: return protocol::WorkerKind::rl;
    case Paradigm::llm: return protocol::WorkerKind::llm;
    case Paradigm::vlm: return protocol::WorkerKind::vlm;
    case Paradigm::human: return protocol::WorkerKind::human;
    case Paradigm::baseline: return protocol::WorkerKind::baseline;
  }
  return protocol::WorkerKind::baseline;
}

std::string_view to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::random: return "random";
    case BaselineKind::noop: return "noop";
    case BaselineKind::cycle: return "cycle";
  }
  return "?";
}

std::optional<BaselineKind> baseline_kind_from_string(std::string_view text) {
  for (auto k : {BaselineKind::random, BaselineKind::noop, BaselineKind::cycle}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

int baseline_action(BaselineKind kind, const ActionSpace& space, std::uint64_t step_index, Rng& rng) {
  switch (kind) {
    case BaselineKind::random:
      return static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(space.k)));
    case BaselineKind::noop:
      return space.null_action;
    case BaselineKind::cycle:
      return static_cast<int>(step_index % static_cast<std::uint64_t>(space.k));
  }
  return space.null_action;
}

BaselineKind WorkerAssignment::baseline_kind() const {
  if (auto it = settings.find("kind"); it != settings.end() && it->is_string()) {
    if (auto k = baseline_kind_from_string(it->get<std::string>())) return *k;
  }
  return BaselineKind::random;
}

ParsePolicy WorkerAssignment::parse_policy() const {
  ParsePolicy p;
  if (auto it = settings.find("grammar"); it != settings.end() && it->is_string()) {
    p.grammar = grammar_from_string(it->get<std::string>()).value_or(p.grammar);
  }
  if (auto it = settings.find("fallback"); it != settings.end() && it->is_string()) {
    p.fallback = fallback_from_string(it->get<std::string>()).value_or(p.fallback);
  }
  return p;
}

env::ObservationOptions WorkerAssignment::observation() const {
  env::ObservationOptions o;
  switch (worker_type) {
    case Paradigm::rl:
    case Paradigm::baseline: o.modality = ObservationModality::tensor; break;
    case Paradigm::llm: o.modality = ObservationModality::text; break;
    case Paradigm::vlm:
      o.modality = ObservationModality::text_image;
      o.max_image_history = settings.value("max_image_history", kDefaultVlmImageHistory);
      break;
    case Paradigm::human: o.modality = ObservationModality::image; break;
  }
  if (auto it = settings.find("observation_mode"); it != settings.end() && it->is_string()) {
    o.mode = env::observation_mode_from_string(it->get<std::string>()).value_or(o.mode);
  }
  return o;
}

std::optional<std::filesystem::path> WorkerAssignment::executable() const {
  if (auto it = settings.find("executable"); it != settings.end() && it->is_string()) {
    return std::filesystem::path(it->get<std::string>());
  }
  return std::nullopt;
}

Json WorkerAssignment::to_json() const {
  return Json{{"worker_type", config_name(worker_type)}, {"settings", settings}, {"frozen", frozen}};
}

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : ValidationError(issues.empty() ? "" : issues.front().path,
                      issues.empty() ? "invalid config"
                                     : issues.front().message +
                                           (issues.size() > 1 ? " (+" + std::to_string(issues.size() - 1) +
                                                                    " more)"
                                                              : "")),
      issues_(std::move(issues)) {}

std::vector<ConfigIssue> validate_run_config(const Json& doc) {
  std::vector<ConfigIssue> out;
  if (auto v = protocol::validate(doc, protocol::schema("run_config"))) {
    out.push_back({v->path, v->message});
    return out;
  }
  if (doc.contains("schema_version")) {
    auto v = protocol::SemVer::parse(doc["schema_version"].get<std::string>());
    if (!v || v->major != protocol::kProtocolVersion.major) {
      out.push_back({"schema_version", "unsupported schema version " + doc["schema_version"].dump()});
    }
  }
  const auto task = doc["task"].get<std::string>();
  const env::TaskInfo* info = nullptr;
  try {
    info = &env::task_info(task);
  } catch (const env::UnknownTaskError&) {
    out.push_back({"task", "unknown task '" + task + "'"});
  }
  const auto& workers = doc["player_workers"];
  for (const auto& [slot, assignment] : workers.items()) {
    const std::string path = "player_workers." + slot;
    if (info && std::find(info->slots.begin(), info->slots.end(), slot) == info->slots.end()) {
      out.push_back({path, "unknown slot '" + slot + "' for task " + task});
    }
    auto p = paradigm_from_string(assignment["worker_type"].get<std::string>());
    check_settings(join(path, "settings"), *p, assignment.value("settings", Json::object()), out);
    if (*p == Paradigm::human && assignment.value("frozen", false)) {
      out.push_back({join(path, "frozen"), "human slots cannot be frozen"});
    }
  }
  if (info) {
    for (const auto& slot : info->slots) {
      if (!workers.contains(slot)) out.push_back({"player_workers." + slot, "missing assignment for slot"});
    }
  }
  return out;
}

RunConfig RunConfig::from_json(const Json& doc) {
  if (auto issues = validate_run_config(doc); !issues.empty()) throw ConfigError(std::move(issues));
  RunConfig c;
  c.schema_version = doc.value("schema_version", c.schema_version);
  c.operator_id = doc["operator_id"].get<std::string>();
  c.env_name = doc.value("env_name", c.env_name);
  c.task = doc["task"].get<std::string>();
  c.mode = doc.value("mode", std::string("parallel")) == "aec" ? StepMode::aec : StepMode::parallel;
  c.seed = doc.value("seed", std::uint64_t{0});
  c.episodes = doc.value("episodes", std::uint64_t{1});
  if (doc.contains("max_steps")) c.max_steps = doc["max_steps"].get<std::uint64_t>();
  c.checkpoint_every = doc.value("checkpoint_every", c.checkpoint_every);
  for (const auto& [slot, a] : doc["player_workers"].items()) {
    WorkerAssignment w;
    w.agent_slot = slot;
    w.worker_type = *paradigm_from_string(a["worker_type"].get<std::string>());
    w.settings = a.value("settings", Json::object());
    w.frozen = a.value("frozen", false);
    c.player_workers.emplace(slot, std::move(w));
  }
  return c;
}

RunConfig RunConfig::parse(std::string_view text) {
  Json doc;
  try {
    doc = parse_json_strict(text);
  } catch (const ValidationError& e) {
    throw ConfigError({{e.field_path(), e.what()}});
  }
  return from_json(doc);
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

Json RunConfig::to_json() const {
  Json workers = Json::object();
  for (const auto& [slot, a] : player_workers) workers[slot] = a.to_json();
  Json doc{{"schema_version", schema_version},
           {"operator_id", operator_id},
           {"env_name", env_name},
           {"task", task},
           {"mode", mode == StepMode::aec ? "aec" : "parallel"},
           {"seed", seed},
           {"episodes", episodes},
           {"checkpoint_every", checkpoint_every},
           {"player_workers", std::move(workers)}};
  if (max_steps) doc["max_steps"] = *max_steps;
  return doc;
}

std::string RunConfig::digest() const { return sha256_hex(canonical()); }

ActionSpace RunConfig::action_space() const {
  const auto& info = task_info();
  return ActionSpace{info.num_actions(), info.action_labels, info.null_action};
}

std::size_t RunConfig::slot_index(const std::string& slot) const {
  const auto& slots = task_info().slots;
  auto it = std::find(slots.begin(), slots.end(), slot);
  if (it == slots.end()) throw NotFoundError("unknown slot " + slot);
  return static_cast<std::size_t>(it - slots.begin());
}

}  // namespace mosaic::operators
