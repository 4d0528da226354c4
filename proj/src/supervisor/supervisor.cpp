#include "mosaic/supervisor/supervisor.hpp"

#include <signal.h>
#include <unistd.h>

#include <condition_variable>
#include <deque>
#include <fstream>
#include <sstream>
#include <thread>
#include <variant>

#include "mosaic/protocol/framing.hpp"

namespace mosaic::supervisor {

using protocol::DecodeError;
using protocol::MessageName;
using protocol::ProtocolMessage;

namespace {

using Inbound = std::variant<ProtocolMessage, DecodeError>;

std::string seconds_text(Duration d) {
  std::ostringstream os;
  os << std::chrono::duration<double>(d).count();
  return os.str();
}

bool write_all(int fd, const std::string& line) {
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    auto n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  return true;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw MosaicError("cannot write " + path.string());
}

}  // namespace

void WorkerSpec::check() const {
  if (executable.empty()) throw ValidationError("executable", "required");
  if (heartbeat_interval <= Duration::zero()) throw ValidationError("heartbeat_interval", "must be positive");
  if (liveness_window < 2 * heartbeat_interval) {
    throw ValidationError("liveness_window", "must be at least twice the heartbeat interval");
  }
}

std::string_view to_string(WorkerState s) {
  switch (s) {
    case WorkerState::starting: return "starting";
    case WorkerState::ready: return "ready";
    case WorkerState::busy: return "busy";
    case WorkerState::paused: return "paused";
    case WorkerState::dead: return "dead";
    case WorkerState::recovering: return "recovering";
  }
  return "?";
}

std::string_view to_string(LivenessEvent::Kind k) {
  switch (k) {
    case LivenessEvent::Kind::missed_heartbeat: return "missed_heartbeat";
    case LivenessEvent::Kind::dead: return "dead";
    case LivenessEvent::Kind::permanent_failure: return "permanent_failure";
    case LivenessEvent::Kind::recovered: return "recovered";
  }
  return "?";
}

std::string_view to_string(ExitReport::Path p) {
  switch (p) {
    case ExitReport::Path::protocol: return "protocol";
    case ExitReport::Path::terminated: return "terminated";
    case ExitReport::Path::forced: return "forced";
  }
  return "?";
}

std::optional<Bytes> load_checkpoint(const CheckpointRef& ref) {
  std::ifstream blob_in(ref.path, std::ios::binary);
  std::ifstream sidecar_in(ref.path.string() + ".sha256");
  if (!blob_in || !sidecar_in) return std::nullopt;
  Bytes blob((std::istreambuf_iterator<char>(blob_in)), std::istreambuf_iterator<char>());
  std::string sidecar;
  sidecar_in >> sidecar;
  const std::string actual = sha256_hex(std::span<const std::uint8_t>(blob));
  if (actual != sidecar || actual != ref.digest) return std::nullopt;
  return blob;
}

struct Supervisor::Worker {
  std::string id;
  WorkerSpec spec;
  ChildProcess proc;
  std::thread reader;

  std::mutex op_mu;  // serializes recover and stop

  std::mutex mu;
  std::condition_variable cv;
  std::deque<Inbound> inbox;
  bool eof = false;
  WorkerState state = WorkerState::starting;
  std::string dead_reason;
  bool dead_reported = false;
  Timestamp last_heartbeat;
  bool warned = false;
  std::uint32_t restarts_used = 0;
  protocol::NegotiatedSession session;
  std::uint64_t next_id = 1;
  std::map<std::uint64_t, ProtocolMessage> in_flight;  // commands awaiting a response
  std::map<std::uint64_t, ProtocolMessage> early;      // responses not yet awaited
  std::optional<ExitReport> exit_report;

  // Replay log of the current episode.
  std::optional<Json> reset_payload;
  std::vector<std::pair<ProtocolMessage, ProtocolMessage>> log;
  std::vector<std::pair<std::size_t, CheckpointRef>> log_checkpoints;  // log position after the checkpoint
  std::vector<CheckpointRef> checkpoints;

  std::mutex write_mu;
};

Supervisor::Supervisor(SupervisorOptions options) : options_(std::move(options)) {
  if (!options_.clock) options_.clock = default_clock();
  become_subreaper();
}

Supervisor::~Supervisor() { shutdown(); }

Supervisor::Worker& Supervisor::find(const std::string& worker_id) const {
  std::lock_guard lock(mu_);
  auto it = workers_.find(worker_id);
  if (it == workers_.end()) throw NotFoundError("unknown worker " + worker_id);
  return *it->second;
}

std::filesystem::path Supervisor::log_path(const std::string& worker_id) const {
  return options_.run_dir / "workers" / (worker_id + ".stderr.log");
}

std::vector<std::string> Supervisor::worker_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, w] : workers_) out.push_back(id);
  return out;
}

std::string Supervisor::spawn(const WorkerSpec& spec) {
  spec.check();
  Worker* w = nullptr;
  {
    std::lock_guard lock(mu_);
    std::string id = spec.name.empty() ? "worker-" + std::to_string(next_name_++) : spec.name;
    if (workers_.count(id)) throw ValidationError("name", "duplicate worker id " + id);
    auto worker = std::make_unique<Worker>();
    worker->id = id;
    worker->spec = spec;
    w = worker.get();
    workers_.emplace(id, std::move(worker));
  }
  try {
    start_process(*w);
  } catch (...) {
    std::lock_guard lock(mu_);
    workers_.erase(w->id);
    throw;
  }
  return w->id;
}

void Supervisor::start_process(Worker& w) {
  const Clock& clock = *options_.clock;
  LaunchSpec launch_spec{w.spec.executable, w.spec.args, w.spec.env_vars, w.spec.working_dir, log_path(w.id)};
  launch_spec.env_vars["MOSAIC_WORKER_ID"] = w.id;
  if (!launch_spec.env_vars.count("MOSAIC_HEARTBEAT_SECS")) {
    launch_spec.env_vars["MOSAIC_HEARTBEAT_SECS"] = seconds_text(clock.to_real(w.spec.heartbeat_interval));
  }
  ChildProcess proc = launch(launch_spec);
  {
    std::lock_guard lock(w.mu);
    w.proc = proc;
    w.inbox.clear();
    w.early.clear();
    w.in_flight.clear();
    w.eof = false;
    w.state = WorkerState::starting;
    w.dead_reason.clear();
    w.dead_reported = false;
    w.exit_report.reset();
  }
  w.reader = std::thread([&w, &clock, fd = proc.stdout_fd] {
    protocol::LineSplitter splitter(protocol::kMaxLineBytes);
    char buf[65536];
    for (;;) {
      auto n = ::read(fd, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      for (auto& line : splitter.feed(std::string_view(buf, static_cast<std::size_t>(n)))) {
        Inbound in;
        if (line.oversized) {
          in = DecodeError{protocol::DecodeFailure::framing, "", "line exceeds limit", ""};
        } else {
          in = protocol::decode_message(line.text);
        }
        std::lock_guard lock(w.mu);
        if (auto* msg = std::get_if<ProtocolMessage>(&in); msg && msg->name == MessageName::heartbeat) {
          w.last_heartbeat = std::max(w.last_heartbeat, clock.now());
          w.warned = false;
          continue;
        }
        w.inbox.push_back(std::move(in));
        w.cv.notify_all();
      }
    }
    std::lock_guard lock(w.mu);
    w.eof = true;
    w.cv.notify_all();
  });

  auto fail = [&](const std::string& message, const std::string& first_line) {
    signal_group(proc.pgid, SIGKILL);
    if (w.reader.joinable()) w.reader.join();
    reap(proc.pid);
    reap_group_leftovers(proc.pgid);
    ::close(proc.stdin_fd);
    ::close(proc.stdout_fd);
    std::lock_guard lock(w.mu);
    w.state = WorkerState::dead;
    w.dead_reason = message;
    w.proc = ChildProcess{};
    throw NegotiationFailure(w.id + ": " + message, first_line, proc.pgid);
  };

  std::unique_lock lock(w.mu);
  const auto deadline = std::chrono::steady_clock::now() + clock.to_real(w.spec.startup_timeout);
  if (!w.cv.wait_until(lock, deadline, [&] { return !w.inbox.empty() || w.eof; })) {
    lock.unlock();
    fail("no handshake within startup timeout", "");
  }
  if (w.inbox.empty()) {
    lock.unlock();
    fail("exited before handshake", "");
  }
  Inbound first = std::move(w.inbox.front());
  w.inbox.pop_front();
  lock.unlock();
  if (auto* err = std::get_if<DecodeError>(&first)) {
    fail("handshake " + std::string(protocol::to_string(err->failure)) + " error: " + err->detail, err->raw_line);
  }
  const auto& msg = std::get<ProtocolMessage>(first);
  if (msg.name != MessageName::handshake) {
    fail("first message was " + std::string(protocol::to_string(msg.name)) + ", not handshake", "");
  }
  protocol::CapabilityManifest manifest;
  try {
    manifest = protocol::CapabilityManifest::from_message(msg);
  } catch (const MosaicError& e) {
    fail(std::string("handshake schema error: ") + e.what(), "");
  }
  auto negotiated = protocol::negotiate(manifest, w.spec.required);
  if (auto* err = std::get_if<protocol::NegotiationError>(&negotiated)) fail(err->describe(), "");

  lock.lock();
  w.session = std::get<protocol::NegotiatedSession>(negotiated);
  w.last_heartbeat = std::max(w.last_heartbeat, clock.now());
  w.warned = false;
  w.state = WorkerState::ready;
}

void Supervisor::mark_dead(Worker& w, const std::string& reason) {
  if (w.state == WorkerState::dead) return;
  w.state = WorkerState::dead;
  w.dead_reason = reason;
  signal_group(w.proc.pgid, SIGKILL);
  w.cv.notify_all();
}

std::uint64_t Supervisor::send(const std::string& worker_id, MessageName name, Json payload) {
  Worker& w = find(worker_id);
  std::unique_lock lock(w.mu);
  if (w.state == WorkerState::dead) throw StateError(w.id + " is dead: " + w.dead_reason);
  if (w.state != WorkerState::ready && w.state != WorkerState::busy) {
    throw StateError(w.id + " is " + std::string(to_string(w.state)));
  }
  if (!w.session.supports(name) && name != MessageName::stop) {
    throw StateError(w.id + " does not support " + std::string(protocol::to_string(name)));
  }
  const std::uint64_t id = w.next_id++;
  ProtocolMessage cmd = protocol::make_command(name, id, std::move(payload));
  const std::string line = protocol::encode_message(cmd);
  w.in_flight.emplace(id, std::move(cmd));
  w.state = WorkerState::busy;
  lock.unlock();
  bool ok;
  {
    std::lock_guard write_lock(w.write_mu);
    ok = write_all(w.proc.stdin_fd, line);
  }
  if (!ok) {
    lock.lock();
    mark_dead(w, "stdin closed");
    throw WorkerDeadError(w.id, w.dead_reason);
  }
  return id;
}

ProtocolMessage Supervisor::await(const std::string& worker_id, std::uint64_t correlation_id,
                                  std::optional<Duration> timeout) {
  Worker& w = find(worker_id);
  return await_locked(w, correlation_id, timeout.value_or(w.spec.liveness_window), false);
}

ProtocolMessage Supervisor::await_locked(Worker& w, std::uint64_t id, Duration timeout, bool replaying) {
  std::unique_lock lock(w.mu);
  auto cmd_it = w.in_flight.find(id);
  if (cmd_it == w.in_flight.end()) throw StateError(w.id + ": no command in flight with id " + std::to_string(id));
  const auto deadline = std::chrono::steady_clock::now() + options_.clock->to_real(timeout);
  std::optional<ProtocolMessage> response;
  for (;;) {
    if (auto it = w.early.find(id); it != w.early.end()) {
      response = std::move(it->second);
      w.early.erase(it);
      break;
    }
    while (!w.inbox.empty() && !response) {
      Inbound in = std::move(w.inbox.front());
      w.inbox.pop_front();
      if (auto* err = std::get_if<DecodeError>(&in)) {
        mark_dead(w, "protocol violation: " + std::string(protocol::to_string(err->failure)) + " " + err->detail);
        break;
      }
      auto& msg = std::get<ProtocolMessage>(in);
      if (msg.correlation_id == id) {
        response = std::move(msg);
      } else if (w.in_flight.count(msg.correlation_id)) {
        w.early.emplace(msg.correlation_id, std::move(msg));
      }
      // Anything else (unsolicited errors, stale replies) is dropped.
    }
    if (response) break;
    if (w.state == WorkerState::dead) break;
    if (w.eof) {
      mark_dead(w, "exited");
      break;
    }
    if (w.cv.wait_until(lock, deadline) == std::cv_status::timeout && w.inbox.empty() && !w.eof) {
      mark_dead(w, "no response within " + seconds_text(timeout) + "s");
      break;
    }
  }
  ProtocolMessage cmd = std::move(w.in_flight.at(id));
  w.in_flight.erase(id);
  if (!response) throw WorkerDeadError(w.id, w.dead_reason);
  if (w.in_flight.empty() && w.state == WorkerState::busy) w.state = WorkerState::ready;
  if (response->name == MessageName::error) {
    throw WorkerError(w.id, response->payload.value("message", std::string("error")), response->payload);
  }
  if (!replaying) record(w, cmd, *response);
  return std::move(*response);
}

ProtocolMessage Supervisor::request(const std::string& worker_id, MessageName name, Json payload,
                                    std::optional<Duration> timeout) {
  auto id = send(worker_id, name, std::move(payload));
  return await(worker_id, id, timeout);
}

void Supervisor::record(Worker& w, const ProtocolMessage& cmd, const ProtocolMessage& response) {
  if (cmd.name == MessageName::stop) return;
  if (cmd.name == MessageName::reset) {
    w.reset_payload = cmd.payload;
    w.log.clear();
    w.log_checkpoints.clear();
    return;
  }
  w.log.emplace_back(cmd, response);
  auto it = response.payload.find("checkpoint");
  if (it == response.payload.end() || !it->is_object()) return;
  auto blob = base64_decode(it->value("state", std::string()));
  const std::string digest = it->value("digest", std::string());
  if (!blob || sha256_hex(std::span<const std::uint8_t>(*blob)) != digest) return;
  CheckpointRef ref;
  ref.worker_id = w.id;
  ref.episode_index = it->value("episode_index", std::uint64_t{0});
  ref.step_index = it->value("step_index", std::uint64_t{0});
  ref.seed = w.reset_payload ? w.reset_payload->value("seed", std::uint64_t{0}) : 0;
  ref.digest = digest;
  ref.created_at = options_.clock->now();
  if (!w.checkpoints.empty()) {
    const auto& last = w.checkpoints.back();
    if (std::pair(ref.episode_index, ref.step_index) < std::pair(last.episode_index, last.step_index)) return;
  }
  ref.path = options_.run_dir / "checkpoints" / w.id /
             (std::to_string(ref.episode_index) + "_" + std::to_string(ref.step_index) + ".ckpt");
  write_file(ref.path, *blob);
  const std::string sidecar = digest + "\n";
  write_file(ref.path.string() + ".sha256", as_bytes(sidecar));
  w.checkpoints.push_back(ref);
  w.log_checkpoints.emplace_back(w.log.size(), ref);
}

std::vector<LivenessEvent> Supervisor::monitor() {
  std::vector<Worker*> all;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, w] : workers_) all.push_back(w.get());
  }
  const Timestamp now = options_.clock->now();
  std::vector<LivenessEvent> events;
  for (Worker* w : all) {
    std::lock_guard lock(w->mu);
    const Duration silence = now - w->last_heartbeat;
    switch (w->state) {
      case WorkerState::ready:
      case WorkerState::busy:
      case WorkerState::paused:
        if (w->eof && w->inbox.empty()) {
          mark_dead(*w, "exited");
        } else if (silence >= w->spec.liveness_window) {
          mark_dead(*w, "no heartbeat for " + seconds_text(silence) + "s");
        } else if (silence > w->spec.heartbeat_interval && !w->warned) {
          w->warned = true;
          events.push_back({w->id, LivenessEvent::Kind::missed_heartbeat, now, silence, "missed heartbeat"});
        }
        break;
      default:
        break;
    }
    if (w->state == WorkerState::dead && !w->dead_reported && !w->exit_report) {
      w->dead_reported = true;
      events.push_back({w->id, LivenessEvent::Kind::dead, now, silence, w->dead_reason});
    }
  }
  if (options_.on_event) {
    for (const auto& e : events) options_.on_event(e);
  }
  return events;
}

void Supervisor::replay(Worker& w) {
  const Duration timeout = w.spec.liveness_window;
  auto exchange = [&](MessageName name, Json payload) {
    std::uint64_t id;
    std::string line;
    {
      std::lock_guard lock(w.mu);
      id = w.next_id++;
      ProtocolMessage cmd = protocol::make_command(name, id, std::move(payload));
      line = protocol::encode_message(cmd);
      w.in_flight.emplace(id, std::move(cmd));
    }
    {
      std::lock_guard write_lock(w.write_mu);
      if (!write_all(w.proc.stdin_fd, line)) {
        std::lock_guard lock(w.mu);
        mark_dead(w, "stdin closed during recovery");
      }
    }
    return await_locked(w, id, timeout, true);
  };

  if (!w.reset_payload) return;
  exchange(MessageName::reset, *w.reset_payload);

  std::size_t start = 0;
  if (w.session.supports(MessageName::restore)) {
    for (auto it = w.log_checkpoints.rbegin(); it != w.log_checkpoints.rend(); ++it) {
      const CheckpointRef& ref = it->second;
      auto blob = load_checkpoint(ref);
      if (!blob) continue;
      try {
        exchange(MessageName::restore, Json{{"state", base64_encode(std::span<const std::uint8_t>(*blob))},
                                            {"digest", ref.digest},
                                            {"episode_index", ref.episode_index},
                                            {"step_index", ref.step_index}});
      } catch (const WorkerError&) {
        continue;
      }
      start = it->first;
      break;
    }
  }
  for (std::size_t i = start; i < w.log.size(); ++i) {
    const auto& [cmd, recorded] = w.log[i];
    Json payload = cmd.payload;
    if (cmd.name == MessageName::step && recorded.name == MessageName::step_result) {
      payload["action"] = recorded.payload.at("action");
    }
    ProtocolMessage again = exchange(cmd.name, payload);
    if (again.name != recorded.name || again.payload != recorded.payload) {
      throw PermanentFailure(w.id + ": replay diverged at command " + std::to_string(i));
    }
  }
}

void Supervisor::recover(const std::string& worker_id) {
  Worker& w = find(worker_id);
  std::lock_guard op(w.op_mu);
  {
    std::lock_guard lock(w.mu);
    if (w.state != WorkerState::dead) throw StateError(w.id + " is not dead");
    if (w.exit_report) throw StateError(w.id + " was stopped");
  }
  auto permanent = [&](const std::string& why) {
    LivenessEvent e{w.id, LivenessEvent::Kind::permanent_failure, options_.clock->now(), Duration::zero(), why};
    if (options_.on_event) options_.on_event(e);
    throw PermanentFailure(w.id + ": " + why);
  };
  if (w.restarts_used >= w.spec.max_restarts) permanent("restart budget exhausted");

  {
    std::lock_guard lock(w.mu);
    w.state = WorkerState::recovering;
    ++w.restarts_used;
  }
  signal_group(w.proc.pgid, SIGKILL);
  if (w.reader.joinable()) w.reader.join();
  if (w.proc.pid > 0) reap(w.proc.pid);
  reap_group_leftovers(w.proc.pgid);
  ::close(w.proc.stdin_fd);
  ::close(w.proc.stdout_fd);

  try {
    start_process(w);
    {
      std::lock_guard lock(w.mu);
      w.state = WorkerState::recovering;
    }
    replay(w);
  } catch (const MosaicError& e) {
    {
      std::lock_guard lock(w.mu);
      mark_dead(w, std::string("recovery failed: ") + e.what());
      w.dead_reported = true;
    }
    permanent(e.what());
  }
  std::lock_guard lock(w.mu);
  w.state = WorkerState::ready;
  LivenessEvent e{w.id, LivenessEvent::Kind::recovered, options_.clock->now(), Duration::zero(),
                  "restart " + std::to_string(w.restarts_used)};
  if (options_.on_event) options_.on_event(e);
}

ExitReport Supervisor::stop_worker(const std::string& worker_id, Duration grace) {
  Worker& w = find(worker_id);
  std::lock_guard op(w.op_mu);
  ChildProcess proc;
  bool alive;
  {
    std::lock_guard lock(w.mu);
    if (w.exit_report) return *w.exit_report;
    proc = w.proc;
    alive = w.state != WorkerState::dead;
    w.state = WorkerState::dead;
    if (w.dead_reason.empty()) w.dead_reason = "stopped";
    w.cv.notify_all();
  }
  ExitReport report;
  report.worker_id = w.id;
  if (proc.pid <= 0) {
    std::lock_guard lock(w.mu);
    w.exit_report = report;
    return report;
  }
  const auto real_grace = options_.clock->to_real(grace);
  auto wait_exit = [&]() -> std::optional<ExitStatus> {
    const auto deadline = std::chrono::steady_clock::now() + real_grace;
    for (;;) {
      if (auto st = try_reap(proc.pid)) return st;
      if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
      std::this_thread::sleep_for(5ms);
    }
  };

  std::optional<ExitStatus> status;
  if (alive) {
    std::uint64_t id;
    {
      std::lock_guard lock(w.mu);
      id = w.next_id++;
    }
    std::lock_guard write_lock(w.write_mu);
    write_all(proc.stdin_fd, protocol::encode_message(protocol::make_command(MessageName::stop, id)));
  }
  status = wait_exit();
  if (!status) {
    report.path = ExitReport::Path::terminated;
    signal_group(proc.pgid, SIGTERM);
    status = wait_exit();
  }
  if (!status) {
    report.path = ExitReport::Path::forced;
    signal_group(proc.pgid, SIGKILL);
    status = reap(proc.pid);
  }
  report.exit_code = status->exit_code;
  report.signal = status->signal;

  // Whatever else lives in the group goes too.
  for (int attempt = 0; attempt < 200; ++attempt) {
    auto members = group_members(proc.pgid);
    if (members.empty()) break;
    if (attempt == 0) report.leftovers_killed = static_cast<int>(members.size());
    signal_group(proc.pgid, SIGKILL);
    reap_group_leftovers(proc.pgid);
    std::this_thread::sleep_for(5ms);
  }
  reap_group_leftovers(proc.pgid);
  if (w.reader.joinable()) w.reader.join();
  ::close(proc.stdin_fd);
  ::close(proc.stdout_fd);

  std::lock_guard lock(w.mu);
  w.proc = ChildProcess{};
  w.exit_report = report;
  return report;
}

void Supervisor::pause(const std::string& worker_id) {
  Worker& w = find(worker_id);
  std::lock_guard lock(w.mu);
  if (w.state != WorkerState::ready) throw StateError(w.id + " is " + std::string(to_string(w.state)));
  w.state = WorkerState::paused;
}

void Supervisor::resume(const std::string& worker_id) {
  Worker& w = find(worker_id);
  std::lock_guard lock(w.mu);
  if (w.state != WorkerState::paused) throw StateError(w.id + " is not paused");
  w.state = WorkerState::ready;
}

void Supervisor::kill_for_test(const std::string& worker_id) {
  Worker& w = find(worker_id);
  std::lock_guard lock(w.mu);
  signal_group(w.proc.pgid, SIGKILL);
}

WorkerInfo Supervisor::info(const std::string& worker_id) const {
  Worker& w = find(worker_id);
  std::lock_guard lock(w.mu);
  return WorkerInfo{w.id,   w.proc.pid,    w.proc.pgid, w.state, w.last_heartbeat, w.restarts_used,
                    w.session, w.dead_reason};
}

std::vector<CheckpointRef> Supervisor::checkpoints(const std::string& worker_id) const {
  Worker& w = find(worker_id);
  std::lock_guard lock(w.mu);
  return w.checkpoints;
}

void Supervisor::shutdown(Duration grace) {
  for (const auto& id : worker_ids()) stop_worker(id, grace);
}

struct MonitorThread::Impl {
  std::mutex mu;
  std::condition_variable cv;
  bool done = false;
  std::thread thread;
};

MonitorThread::MonitorThread(Supervisor& supervisor, std::chrono::milliseconds tick) : impl_(new Impl) {
  impl_->thread = std::thread([this, &supervisor, tick] {
    std::unique_lock lock(impl_->mu);
    while (!impl_->cv.wait_for(lock, tick, [this] { return impl_->done; })) {
      lock.unlock();
      supervisor.monitor();
      lock.lock();
    }
  });
}

MonitorThread::~MonitorThread() {
  {
    std::lock_guard lock(impl_->mu);
    impl_->done = true;
  }
  impl_->cv.notify_all();
  impl_->thread.join();
}

}  // namespace mosaic::supervisor
