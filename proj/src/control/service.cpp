#include "mosaic/control/service.hpp"

#include <atomic>
#include <set>
#include <thread>

#include "mosaic/evaluation/run.hpp"
#include "mosaic/evaluation/session.hpp"
#include "mosaic/operators/config.hpp"

namespace mosaic::control {

using evaluation::ManualSession;
using operators::RunConfig;

EventBus::EventBus(std::string subject) : subject_(std::move(subject)) {}

std::uint64_t EventBus::publish(const std::string& kind, Json data) {
  std::uint64_t seq;
  {
    std::lock_guard lock(mu_);
    seq = events_.size() + 1;
    events_.push_back(Json{{"seq", seq},
                           {"kind", kind},
                           {"session_id", subject_},
                           {"data", data.is_object() ? std::move(data) : Json::object()}});
  }
  cv_.notify_all();
  return seq;
}

std::vector<Json> EventBus::since(std::uint64_t after) const {
  std::lock_guard lock(mu_);
  if (after >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(after), events_.end()};
}

std::vector<Json> EventBus::wait(std::uint64_t after, Duration timeout) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || events_.size() > after; });
  if (after >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(after), events_.end()};
}

void EventBus::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool EventBus::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::uint64_t EventBus::last_seq() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

struct ControlService::RunEntry {
  std::string id;
  RunConfig config;
  std::shared_ptr<EventBus> bus;
  mutable std::mutex mu;
  mutable std::condition_variable done_cv;
  std::string status = "created";
  evaluation::RunControl control;
  std::thread worker;
  std::optional<evaluation::RunResult> result;
  bool done = false;
};

struct ControlService::SessionEntry {
  std::string id;
  std::string task;
  std::uint64_t seed = 0;
  std::vector<RunConfig> operators;
  std::shared_ptr<EventBus> bus;
  mutable std::mutex mu;
  std::string status = "created";
  std::unique_ptr<ManualSession> session;
  std::string failure;
};

namespace {

std::uint64_t seed_of(const Json& doc, const std::string& field) {
  if (!doc.contains(field)) throw ValidationError(field, "required");
  const auto& v = doc.at(field);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw ValidationError(field, "must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

void check_id(const std::string& id, const std::string& field) {
  if (id.empty() || id == "." || id == ".." || id.find('/') != std::string::npos) {
    throw ValidationError(field, "not a usable identifier");
  }
}

std::string fresh_suffix() {
  static std::atomic<std::uint64_t> counter{0};
  const auto now = std::chrono::steady_clock::now().time_since_epoch().count();
  return sha256_hex(std::to_string(now) + ":" + std::to_string(counter++)).substr(0, 12);
}

Json frame_json(const evaluation::Frame& f) {
  Json badges = Json::array();
  for (const auto& b : f.badges) badges.push_back(b.to_json());
  return Json{{"replica", f.replica},
              {"barrier", f.barrier},
              {"ascii", f.ascii},
              {"rgb",
               Json{{"encoding", "rgb"},
                    {"shape", {f.rgb.height, f.rgb.width, 3}},
                    {"digest", sha256_hex(std::span<const std::uint8_t>(f.rgb.pixels))},
                    {"data", base64_encode(f.rgb.pixels)}}},
              {"badges", badges}};
}

}  // namespace

ControlService::ControlService(ServiceOptions options) : options_(std::move(options)) {}

ControlService::~ControlService() { shutdown(); }

std::shared_ptr<ControlService::RunEntry> ControlService::run(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = runs_.find(id);
  if (it == runs_.end()) throw NotFoundError("no run " + id);
  return it->second;
}

std::shared_ptr<ControlService::SessionEntry> ControlService::session(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("no session " + id);
  return it->second;
}

Json ControlService::envs() {
  static const std::map<std::string, std::map<std::string, std::string>> kKeys{
      {std::string(env::kCorridorTask),
       {{"Space", "stay"}, {"ArrowRight", "forward"}, {"ArrowUp", "forward"}, {"ArrowLeft", "back"},
        {"ArrowDown", "back"}}},
      {std::string(env::kTeamTagTask),
       {{"Space", "stay"}, {"ArrowUp", "up"}, {"ArrowDown", "down"}, {"ArrowLeft", "left"}, {"ArrowRight", "right"}}},
  };
  Json out = Json::array();
  for (const auto& id : env::registered_tasks()) {
    const auto& info = env::task_info(id);
    Json keys = Json::object();
    if (auto it = kKeys.find(id); it != kKeys.end()) {
      for (const auto& [code, label] : it->second) keys[code] = label;
    }
    out.push_back(Json{{"task", id},
                       {"slots", info.slots},
                       {"actions", info.action_labels},
                       {"null_action", info.null_action},
                       {"horizon", info.horizon},
                       {"keymap", keys}});
  }
  return Json{{"envs", out}};
}

Json ControlService::create_run(std::string_view body, std::optional<std::string> run_id) {
  auto config = RunConfig::parse(body);
  for (const auto& [slot, a] : config.player_workers) {
    if (a.worker_type == operators::Paradigm::human) {
      throw ValidationError("player_workers." + slot + ".worker_type", "human slots need a manual session");
    }
  }
  const std::string id = run_id.value_or(evaluation::default_run_id(config));
  check_id(id, "run_id");
  telemetry::RunRegistry registry(options_.home);
  auto entry = std::make_shared<RunEntry>();
  entry->id = id;
  entry->config = std::move(config);
  entry->bus = std::make_shared<EventBus>(id);
  {
    std::lock_guard lock(mu_);
    if (runs_.count(id) || sessions_.count(id) || std::filesystem::exists(registry.run_dir(id))) {
      throw StateError("run " + id + " already exists");
    }
    runs_[id] = entry;
  }
  entry->bus->publish("state", Json{{"status", "created"}});
  return Json{{"run_id", id}, {"status", "created"}};
}

void ControlService::finish_run(const std::shared_ptr<RunEntry>& entry) {
  {
    std::lock_guard lock(entry->mu);
    entry->done = true;
  }
  entry->bus->close();
  entry->done_cv.notify_all();
}

Json ControlService::run_control(const std::string& run_id, const std::string& verb) {
  auto entry = run(run_id);
  std::lock_guard lock(entry->mu);
  const std::string& st = entry->status;
  auto refuse = [&]() -> Json { throw StateError("cannot " + verb + " a run that is " + st); };

  if (verb == "start") {
    if (st != "created") refuse();
    entry->status = "running";
    evaluation::RunOptions ro;
    ro.home = options_.home;
    ro.run_id = entry->id;
    ro.worker_executable = options_.worker_executable;
    ro.clock = options_.clock;
    ro.control = &entry->control;
    auto bus = entry->bus;
    ro.on_event = [bus](const std::string& kind, const Json& data) {
      if (kind == "closed") return;  // published after the status settles
      if (kind == "state" && data.value("status", "") == "running") return;
      bus->publish(kind, data);
    };
    entry->bus->publish("state", Json{{"status", "running"}});
    entry->worker = std::thread([this, entry, ro]() mutable {
      evaluation::RunResult result;
      try {
        result = evaluation::run_script(entry->config, ro);
      } catch (const std::exception& e) {
        result.run_id = entry->id;
        result.status = "failed";
        result.error = e.what();
      }
      {
        std::lock_guard lock(entry->mu);
        entry->status = result.status;
        entry->result = result;
      }
      entry->bus->publish("closed", result.to_json());
      finish_run(entry);
    });
  } else if (verb == "pause") {
    if (st != "running") refuse();
    entry->control.pause();
    entry->status = "paused";
    entry->bus->publish("state", Json{{"status", "paused"}});
  } else if (verb == "resume") {
    if (st != "paused") refuse();
    entry->control.resume();
    entry->status = "running";
    entry->bus->publish("state", Json{{"status", "running"}});
  } else if (verb == "stop") {
    if (st == "created") {
      entry->status = "stopped";
      entry->bus->publish("state", Json{{"status", "stopped"}});
      entry->bus->publish("closed", Json{{"run_id", entry->id}, {"status", "stopped"}, {"episodes", 0}});
      entry->done = true;
      entry->bus->close();
      entry->done_cv.notify_all();
    } else if (st == "running" || st == "paused") {
      entry->control.stop();
      entry->status = "stopping";
      entry->bus->publish("state", Json{{"status", "stopping"}});
    } else {
      refuse();
    }
  } else {
    throw ValidationError("verb", "unknown run verb " + verb);
  }
  return Json{{"run_id", entry->id}, {"status", entry->status}};
}

Json ControlService::get_run(const std::string& run_id) const {
  std::shared_ptr<RunEntry> entry;
  {
    std::lock_guard lock(mu_);
    if (auto it = runs_.find(run_id); it != runs_.end()) entry = it->second;
  }
  telemetry::RunRegistry registry(options_.home);
  Json out{{"run_id", run_id}};
  if (entry) {
    std::lock_guard lock(entry->mu);
    out["status"] = entry->status;
    out["config_digest"] = entry->config.digest();
    out["operator_id"] = entry->config.operator_id;
    out["last_seq"] = entry->bus->last_seq();
    if (entry->result) out["result"] = entry->result->to_json();
  }
  if (registry.exists(run_id)) {
    auto manifest = registry.manifest(run_id);
    out["manifest"] = manifest.to_json();
    if (!entry) out["status"] = manifest.status;
  } else if (!entry) {
    throw NotFoundError("no run " + run_id);
  }
  return out;
}

Json ControlService::list_runs() const {
  std::set<std::string> ids;
  for (const auto& id : telemetry::RunRegistry(options_.home).list()) ids.insert(id);
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, _] : runs_) ids.insert(id);
  }
  Json out = Json::array();
  for (const auto& id : ids) {
    auto doc = get_run(id);
    out.push_back(Json{{"run_id", id}, {"status", doc["status"]}});
  }
  return Json{{"runs", out}};
}

std::string ControlService::export_run(const std::string& run_id, telemetry::Stream stream) const {
  telemetry::RunRegistry registry(options_.home);
  if (!registry.exists(run_id)) {
    run(run_id);  // NotFoundError for unknown ids
    return {};
  }
  return telemetry::export_jsonl(registry.run_dir(run_id), stream);
}

Json ControlService::query_run(const std::string& run_id, const telemetry::QueryFilter& filter) const {
  telemetry::RunRegistry registry(options_.home);
  if (!registry.exists(run_id)) {
    run(run_id);
    return telemetry::Aggregates{}.to_json();
  }
  return telemetry::query(registry.run_dir(run_id), filter).to_json();
}

Json ControlService::wait_run(const std::string& run_id, Duration timeout) const {
  auto entry = run(run_id);
  {
    std::unique_lock lock(entry->mu);
    entry->done_cv.wait_for(lock, timeout, [&] { return entry->done || entry->status == "created"; });
  }
  return get_run(run_id);
}

Json ControlService::create_session(std::string_view body) {
  Json doc = parse_json_strict(body);
  if (!doc.is_object()) throw ValidationError("", "session document must be an object");
  auto entry = std::make_shared<SessionEntry>();
  if (!doc.contains("task") || !doc["task"].is_string()) throw ValidationError("task", "required string");
  entry->task = doc["task"].get<std::string>();
  try {
    env::task_info(entry->task);
  } catch (const std::exception&) {
    throw ValidationError("task", "unknown task " + entry->task);
  }
  entry->seed = seed_of(doc, "seed");
  if (!doc.contains("operators") || !doc["operators"].is_array()) {
    throw ValidationError("operators", "required array of run configs");
  }
  const auto& ops = doc["operators"];
  if (ops.empty() || ops.size() > options_.max_replicas) {
    throw ValidationError("operators", "need between 1 and " + std::to_string(options_.max_replicas) + " operators");
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::string where = "operators[" + std::to_string(i) + "]";
    Json op = ops[i];
    if (op.is_object()) {
      if (!op.contains("task")) op["task"] = entry->task;
      if (!op.contains("operator_id")) op["operator_id"] = "replica_" + std::to_string(i);
    }
    try {
      entry->operators.push_back(RunConfig::from_json(op));
    } catch (const operators::ConfigError& e) {
      const auto& issue = e.issues().front();
      throw ValidationError(where + (issue.path.empty() ? "" : "." + issue.path), issue.message);
    }
    if (entry->operators.back().task != entry->task) {
      throw ValidationError(where + ".task", "differs from the session task");
    }
  }
  if (doc.contains("session_id")) {
    if (!doc["session_id"].is_string()) throw ValidationError("session_id", "must be a string");
    entry->id = doc["session_id"].get<std::string>();
  } else {
    entry->id = "session-" + fresh_suffix();
  }
  check_id(entry->id, "session_id");
  entry->bus = std::make_shared<EventBus>(entry->id);
  {
    std::lock_guard lock(mu_);
    if (sessions_.count(entry->id) || runs_.count(entry->id)) {
      throw StateError("session " + entry->id + " already exists");
    }
    sessions_[entry->id] = entry;
  }
  entry->bus->publish("state", Json{{"status", "created"}, {"barrier", 0}});
  return Json{{"session_id", entry->id}, {"status", "created"}, {"replicas", entry->operators.size()}};
}

Json ControlService::session_control(const std::string& session_id, const std::string& verb) {
  auto entry = session(session_id);
  std::lock_guard lock(entry->mu);
  auto refuse = [&]() -> Json { throw StateError("cannot " + verb + " a session that is " + entry->status); };
  Json out{{"session_id", entry->id}};

  if (verb == "start") {
    if (entry->status != "created") refuse();
    evaluation::SessionOptions so;
    so.session_id = entry->id;
    so.run_id = entry->id;
    so.run_dir = options_.home / "sessions" / entry->id;
    so.worker_executable = options_.worker_executable;
    so.clock = options_.clock;
    so.max_replicas = options_.max_replicas;
    auto bus = entry->bus;
    so.on_event = [bus](const std::string& kind, const Json& data) {
      if (kind == "state" || kind == "closed") return;  // the service reports its own transitions
      bus->publish(kind, data);
    };
    try {
      entry->session = ManualSession::open(entry->operators, entry->task, entry->seed, so);
    } catch (const std::exception& e) {
      entry->status = "failed";
      entry->failure = e.what();
      entry->bus->publish("state", Json{{"status", "failed"}, {"error", entry->failure}});
      entry->bus->close();
      throw;
    }
    entry->status = "running";
    entry->bus->publish("state", Json{{"status", "running"}, {"barrier", 0}});
  } else if (verb == "step") {
    if (entry->status != "running") refuse();
    evaluation::BarrierOutcome outcome;
    try {
      outcome = entry->session->step();
    } catch (const std::exception& e) {
      entry->status = "failed";
      entry->failure = e.what();
      entry->bus->publish("state", Json{{"status", "failed"}, {"error", entry->failure}});
      throw MosaicError("barrier failed: " + entry->failure);
    }
    if (!outcome.advanced) {
      Json waiting = Json::array();
      for (const auto& [replica, slots] : outcome.blocked) waiting.push_back(Json{{"replica", replica}, {"slots", slots}});
      throw BlockedConflict(waiting);
    }
    std::size_t n = 0;
    for (const auto& r : outcome.records) n += r.size();
    out["records"] = n;
  } else if (verb == "pause") {
    if (entry->status != "running") refuse();
    entry->session->pause();
    entry->status = "paused";
    entry->bus->publish("state", Json{{"status", "paused"}, {"barrier", entry->session->barrier()}});
  } else if (verb == "resume") {
    if (entry->status != "paused") refuse();
    entry->session->resume();
    entry->status = "running";
    entry->bus->publish("state", Json{{"status", "running"}, {"barrier", entry->session->barrier()}});
  } else if (verb == "stop") {
    if (entry->status == "finished" || entry->status == "stopped") refuse();
    if (entry->session) entry->session->stop();
    entry->status = entry->status == "failed" ? "failed" : "finished";
    const auto barrier = entry->session ? entry->session->barrier() : 0;
    entry->bus->publish("state", Json{{"status", entry->status}, {"barrier", barrier}});
    entry->bus->publish("closed", Json{{"status", entry->status}, {"barrier", barrier}});
    entry->bus->close();
  } else {
    throw ValidationError("verb", "unknown session verb " + verb);
  }
  out["status"] = entry->status;
  out["barrier"] = entry->session ? entry->session->barrier() : 0;
  return out;
}

Json ControlService::submit_action(const std::string& session_id, std::string_view body) {
  auto entry = session(session_id);
  Json doc = parse_json_strict(body);
  if (!doc.is_object()) throw ValidationError("", "action document must be an object");
  const auto replica = seed_of(doc, "replica");
  if (!doc.contains("slot") || !doc["slot"].is_string()) throw ValidationError("slot", "required string");
  const auto slot = doc["slot"].get<std::string>();
  if (!doc.contains("action") || !doc["action"].is_number_integer()) throw ValidationError("action", "required integer");
  const auto action = doc["action"].get<std::int64_t>();
  std::lock_guard lock(entry->mu);
  if (entry->status != "running" && entry->status != "paused") {
    throw StateError("session " + entry->id + " is " + entry->status);
  }
  if (replica >= entry->operators.size()) throw NotFoundError("no replica " + std::to_string(replica));
  const auto& info = env::task_info(entry->task);
  if (action < 0 || action >= info.num_actions()) {
    throw ValidationError("action", "outside [0, " + std::to_string(info.num_actions()) + ")");
  }
  auto& box = entry->session->mailbox(replica, slot);
  auto ack = box.submit(static_cast<int>(action), entry->session->barrier());
  return Json{{"session_id", entry->id},
              {"replica", replica},
              {"slot", slot},
              {"action", action},
              {"replaced", ack.replaced},
              {"barrier", ack.barrier}};
}

Json ControlService::frames(const std::string& session_id, std::uint64_t barrier) const {
  auto entry = session(session_id);
  std::lock_guard lock(entry->mu);
  if (!entry->session) throw NotFoundError("session " + entry->id + " has not started");
  Json out = Json::array();
  for (const auto& f : entry->session->frames(barrier)) out.push_back(frame_json(f));
  return Json{{"session_id", entry->id}, {"barrier", barrier}, {"frames", out}};
}

Json ControlService::get_session(const std::string& session_id) const {
  auto entry = session(session_id);
  std::lock_guard lock(entry->mu);
  Json out{{"session_id", entry->id},
           {"status", entry->status},
           {"task", entry->task},
           {"seed", entry->seed},
           {"replicas", entry->operators.size()},
           {"last_seq", entry->bus->last_seq()}};
  if (!entry->failure.empty()) out["error"] = entry->failure;
  if (entry->session) {
    out["barrier"] = entry->session->barrier();
    out["replica_steps"] = entry->session->replica_steps();
    Json badges = Json::array();
    for (std::size_t i = 0; i < entry->session->replica_count(); ++i) {
      Json b = Json::array();
      for (const auto& badge : entry->session->badges(i)) b.push_back(badge.to_json());
      badges.push_back(Json{{"replica", i}, {"badges", b}, {"episode_index", entry->session->episode_index(i)}});
    }
    out["badges"] = badges;
  } else {
    out["barrier"] = 0;
  }
  return out;
}

Json ControlService::list_sessions() const {
  std::vector<std::string> ids;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, _] : sessions_) ids.push_back(id);
  }
  Json out = Json::array();
  for (const auto& id : ids) {
    auto doc = get_session(id);
    out.push_back(Json{{"session_id", id}, {"status", doc["status"]}});
  }
  return Json{{"sessions", out}};
}

std::string ControlService::export_session(const std::string& session_id, std::size_t replica,
                                           telemetry::Stream stream) const {
  auto entry = session(session_id);
  if (replica >= entry->operators.size()) throw NotFoundError("no replica " + std::to_string(replica));
  return telemetry::export_jsonl(options_.home / "sessions" / entry->id, stream,
                                 entry->id + ".r" + std::to_string(replica));
}

std::shared_ptr<EventBus> ControlService::events(const std::string& subject) const {
  std::lock_guard lock(mu_);
  if (auto it = runs_.find(subject); it != runs_.end()) return it->second->bus;
  if (auto it = sessions_.find(subject); it != sessions_.end()) return it->second->bus;
  throw NotFoundError("no run or session " + subject);
}

void ControlService::shutdown() {
  std::vector<std::shared_ptr<RunEntry>> runs;
  std::vector<std::shared_ptr<SessionEntry>> sessions;
  {
    std::lock_guard lock(mu_);
    for (auto& [_, r] : runs_) runs.push_back(r);
    for (auto& [_, s] : sessions_) sessions.push_back(s);
  }
  for (auto& r : runs) {
    r->control.stop();
    if (r->worker.joinable()) r->worker.join();
  }
  for (auto& s : sessions) {
    std::lock_guard lock(s->mu);
    if (s->session) s->session->stop();
    s->bus->close();
  }
}

}  // namespace mosaic::control
