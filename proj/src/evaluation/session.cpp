#include "mosaic/evaluation/session.hpp"

#include <atomic>

#include "mosaic/evaluation/stepper.hpp"

namespace mosaic::evaluation {

using operators::Paradigm;

std::string_view badge_color(Paradigm p) {
  switch (p) {
    case Paradigm::rl: return "purple";
    case Paradigm::llm: return "blue";
    case Paradigm::human: return "orange";
    case Paradigm::vlm: return "teal";
    case Paradigm::baseline: return "gray";
  }
  return "gray";
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::running: return "running";
    case SessionStatus::paused: return "paused";
    case SessionStatus::finished: return "finished";
    case SessionStatus::failed: return "failed";
  }
  return "?";
}

Json Badge::to_json() const { return Json{{"slot", slot}, {"paradigm", paradigm}, {"color", color}}; }

struct ManualSession::Replica {
  std::size_t index = 0;
  std::unique_ptr<operators::OperatorHandle> handle;
  std::unique_ptr<telemetry::TelemetryWriter> writer;
  env::EnvState state;
  std::uint64_t episode = 0;
  std::uint64_t steps = 0;
  std::vector<telemetry::StepRecord> episode_records;
  std::vector<Badge> badges;
  StepContext ctx;
};

namespace {

std::string generate_session_id() {
  static std::atomic<std::uint64_t> counter{0};
  const auto now = std::chrono::steady_clock::now().time_since_epoch().count();
  return "s" + sha256_hex(std::to_string(now) + ":" + std::to_string(counter++)).substr(0, 12);
}

}  // namespace

std::unique_ptr<ManualSession> ManualSession::open(std::vector<operators::RunConfig> operators,
                                                   const std::string& task, std::uint64_t seed,
                                                   SessionOptions options) {
  if (operators.empty() || operators.size() > options.max_replicas) {
    throw ValidationError("operators", "need between 1 and " + std::to_string(options.max_replicas) + " replicas");
  }
  env::task_info(task);
  std::unique_ptr<ManualSession> s(new ManualSession());
  s->id_ = options.session_id.empty() ? generate_session_id() : options.session_id;
  s->task_ = task;
  s->seed_ = seed;
  s->options_ = std::move(options);
  if (s->options_.run_dir.empty()) throw ValidationError("run_dir", "sessions need a telemetry directory");
  std::filesystem::create_directories(s->options_.run_dir);

  supervisor::SupervisorOptions sup_options;
  sup_options.run_dir = s->options_.run_dir;
  sup_options.clock = s->options_.clock;
  auto* raw = s.get();
  sup_options.on_event = [raw](const supervisor::LivenessEvent& e) {
    raw->emit("liveness", Json{{"worker_id", e.worker_id}, {"kind", supervisor::to_string(e.kind)},
                               {"detail", e.detail}});
  };
  s->sup_ = std::make_unique<supervisor::Supervisor>(sup_options);

  std::vector<env::EnvState> initial;
  for (std::size_t i = 0; i < operators.size(); ++i) {
    auto config = std::move(operators[i]);
    const std::string where = "replicas[" + std::to_string(i) + "]";
    if (config.task != task) throw ValidationError(where + ".task", "replica task differs from the session task");
    config.seed = seed;
    auto r = std::make_unique<Replica>();
    r->index = i;
    operators::BindOptions bind;
    bind.worker_executable = s->options_.worker_executable;
    bind.name_prefix = "r" + std::to_string(i) + ".";
    try {
      r->handle = operators::OperatorHandle::bind(config, *s->sup_, bind);
    } catch (const ValidationError& e) {
      throw ValidationError(where, e.what());
    } catch (const supervisor::SpawnError& e) {
      throw supervisor::SpawnError(where + ": " + e.what());
    }
    for (const auto& slot : r->handle->slots()) {
      auto p = r->handle->paradigm(slot);
      r->badges.push_back(Badge{slot, std::string(to_string(p)), std::string(badge_color(p))});
    }
    const std::string run_id = s->options_.run_id.empty() ? s->id_ : s->options_.run_id;
    r->ctx = StepContext{run_id, s->replica_session_id(i), 0, config.max_steps};
    r->writer = std::make_unique<telemetry::TelemetryWriter>(s->options_.run_dir, run_id, r->ctx.session_id);
    r->state = env::make_env(task, seed, 0);
    r->handle->begin_episode(seed, 0);
    initial.push_back(r->state);
    s->replicas_.push_back(std::move(r));
  }
  s->history_.push_back(std::move(initial));
  s->emit("state", Json{{"status", "running"}, {"barrier", 0}});
  return s;
}

ManualSession::~ManualSession() {
  try {
    stop();
  } catch (...) {
  }
}

std::string ManualSession::replica_session_id(std::size_t replica) const {
  return id_ + ".r" + std::to_string(replica);
}

void ManualSession::emit(const std::string& kind, const Json& data) {
  if (options_.on_event) options_.on_event(kind, data);
}

void ManualSession::set_status(SessionStatus st) {
  status_ = st;
  emit("state", Json{{"status", to_string(st)}, {"barrier", barrier_}});
}

BarrierOutcome ManualSession::step() {
  std::lock_guard lock(mu_);
  if (status_ != SessionStatus::running) {
    throw StateError("session " + id_ + " is " + std::string(to_string(status_)));
  }
  BarrierOutcome out;
  for (const auto& r : replicas_) {
    if (auto blocked = r->handle->blocked_slots(); !blocked.empty()) out.blocked[r->index] = std::move(blocked);
  }
  if (!out.blocked.empty()) {
    Json waiting = Json::array();
    for (const auto& [i, slots] : out.blocked) waiting.push_back(Json{{"replica", i}, {"slots", slots}});
    emit("action_required", Json{{"barrier", barrier_}, {"waiting", waiting}});
    return out;
  }

  // Decide everywhere before committing anywhere.
  std::vector<Advance> next;
  try {
    for (auto& r : replicas_) next.push_back(advance(*r->handle, r->state, r->ctx));
  } catch (const std::exception& e) {
    failure_ = e.what();
    set_status(SessionStatus::failed);
    throw;
  }

  ++barrier_;
  std::vector<env::EnvState> frame_states;
  Json frame_refs = Json::array();
  for (std::size_t i = 0; i < replicas_.size(); ++i) {
    auto& r = *replicas_[i];
    auto& a = next[i];
    const std::string ref = "frames/" + std::to_string(barrier_) + "/" + std::to_string(i);
    for (auto& rec : a.records) {
      rec.render_ref = ref;
      r.writer->append(rec);
      r.episode_records.push_back(rec);
    }
    ++r.steps;
    r.state = std::move(a.state);
    frame_states.push_back(r.state);
    Json badges = Json::array();
    for (const auto& b : r.badges) badges.push_back(b.to_json());
    frame_refs.push_back(Json{{"replica", i}, {"render_ref", ref}, {"badges", badges}});
    out.records.push_back(a.records);
    if (a.episode_over) {
      auto episode = summarize_episode(r.ctx, r.state, r.handle->slots(), r.episode_records);
      r.writer->append(episode);
      r.writer->flush(true);
      emit("episode", Json{{"replica", i}, {"record", episode.to_json()}});
      r.episode_records.clear();
      ++r.episode;
      r.ctx.episode_index = r.episode;
      r.state = env::make_env(task_, seed_, r.episode);
      r.handle->begin_episode(seed_, r.episode);
    } else {
      r.writer->flush(false);
    }
  }
  history_.push_back(std::move(frame_states));
  out.advanced = true;
  Json step_records = Json::array();
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    for (const auto& rec : out.records[i]) step_records.push_back(Json{{"replica", i}, {"record", rec.to_json()}});
  }
  emit("step", Json{{"barrier", barrier_}, {"records", step_records}});
  emit("frame", Json{{"barrier", barrier_}, {"frames", frame_refs}});
  return out;
}

void ManualSession::pause() {
  std::lock_guard lock(mu_);
  if (status_ != SessionStatus::running) throw StateError("only a running session can pause");
  set_status(SessionStatus::paused);
}

void ManualSession::resume() {
  std::lock_guard lock(mu_);
  if (status_ != SessionStatus::paused) throw StateError("only a paused session can resume");
  set_status(SessionStatus::running);
}

void ManualSession::stop() {
  std::lock_guard lock(mu_);
  if (closed_) return;
  closed_ = true;
  for (auto& r : replicas_) {
    r->writer->flush(true);
    r->handle->close();
  }
  sup_->shutdown();
  if (status_ != SessionStatus::failed) set_status(SessionStatus::finished);
  emit("closed", Json{{"barrier", barrier_}, {"status", to_string(status_)}});
}

SessionStatus ManualSession::status() const {
  std::lock_guard lock(mu_);
  return status_;
}

std::uint64_t ManualSession::barrier() const {
  std::lock_guard lock(mu_);
  return barrier_;
}

std::vector<std::uint64_t> ManualSession::replica_steps() const {
  std::lock_guard lock(mu_);
  std::vector<std::uint64_t> out;
  for (const auto& r : replicas_) out.push_back(r->steps);
  return out;
}

std::uint64_t ManualSession::episode_index(std::size_t replica) const {
  std::lock_guard lock(mu_);
  return replicas_.at(replica)->episode;
}

env::EnvState ManualSession::state(std::size_t replica) const {
  std::lock_guard lock(mu_);
  return replicas_.at(replica)->state;
}

const std::vector<Badge>& ManualSession::badges(std::size_t replica) const {
  std::lock_guard lock(mu_);
  return replicas_.at(replica)->badges;
}

std::string ManualSession::failure() const {
  std::lock_guard lock(mu_);
  return failure_;
}

operators::HumanMailbox& ManualSession::mailbox(std::size_t replica, const std::string& slot) {
  std::lock_guard lock(mu_);
  if (replica >= replicas_.size()) throw NotFoundError("no replica " + std::to_string(replica));
  const auto& slots = replicas_[replica]->handle->slots();
  if (std::find(slots.begin(), slots.end(), slot) == slots.end()) throw NotFoundError("no slot " + slot);
  auto* box = replicas_[replica]->handle->mailbox(slot);
  if (!box) throw ValidationError("slot", slot + " is not a human slot");
  return *box;
}

std::vector<Frame> ManualSession::frames(std::uint64_t b) const {
  std::lock_guard lock(mu_);
  if (b >= history_.size()) throw NotFoundError("barrier " + std::to_string(b) + " not reached");
  std::vector<Frame> out;
  for (std::size_t i = 0; i < history_[b].size(); ++i) {
    const auto& st = history_[b][i];
    Frame f;
    f.replica = i;
    f.barrier = b;
    f.ascii = env::render_ascii(st);
    f.rgb = env::render_rgb(st);
    if (i < replicas_.size()) f.badges = replicas_[i]->badges;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace mosaic::evaluation
