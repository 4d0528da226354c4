#include "mosaic/worker/worker.hpp"

#include <signal.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <fcntl.h>
#include <filesystem>
#include <mutex>
#include <thread>

#include "mosaic/protocol/capability.hpp"
#include "mosaic/protocol/framing.hpp"
#include "mosaic/protocol/message.hpp"

namespace mosaic::worker {

namespace {

using protocol::MessageName;
using protocol::ProtocolMessage;

bool claim_marker(const std::string& path) {
  if (path.empty()) return true;
  int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY | O_CLOEXEC, 0644);
  if (fd < 0) return false;
  ::close(fd);
  return true;
}

class Output {
 public:
  explicit Output(int fd) : fd_(fd) {}
  void send(const ProtocolMessage& msg) { write_line(protocol::encode_message(msg)); }
  void write_line(const std::string& line) {
    std::lock_guard lock(mu_);
    const char* p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
      auto n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        return;
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

 private:
  int fd_;
  std::mutex mu_;
};

class Heartbeat {
 public:
  Heartbeat(Output& out, double interval_secs) : out_(out), period_(interval_secs / 2.0) {
    thread_ = std::thread([this] { loop(); });
  }
  ~Heartbeat() {
    {
      std::lock_guard lock(mu_);
      done_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }
  void silence() { silenced_ = true; }

 private:
  void loop() {
    std::unique_lock lock(mu_);
    std::uint64_t seq = 0;
    const auto period = std::chrono::duration<double>(period_);
    while (!cv_.wait_for(lock, period, [this] { return done_; })) {
      if (silenced_) continue;
      out_.send(protocol::make_response(MessageName::heartbeat, 0, Json{{"seq", ++seq}}));
    }
  }

  Output& out_;
  double period_;
  std::atomic<bool> silenced_{false};
  std::mutex mu_;
  std::condition_variable cv_;
  bool done_ = false;
  std::thread thread_;
};

protocol::WorkerKind kind_for(const WorkerOptions& o) {
  switch (o.kind) {
    case PolicyKind::greedy: return protocol::WorkerKind::rl;
    case PolicyKind::text: return o.max_image_history > 0 ? protocol::WorkerKind::vlm : protocol::WorkerKind::llm;
    default: return protocol::WorkerKind::baseline;
  }
}

class Session {
 public:
  Session(const WorkerOptions& options, Output& out) : options_(options), out_(out) {}

  protocol::CapabilityManifest manifest() const {
    protocol::CapabilityManifest m;
    m.worker_kind = kind_for(options_);
    m.supported_commands = {MessageName::reset, MessageName::step, MessageName::stop, MessageName::select_action,
                            MessageName::restore};
    if (options_.kind == PolicyKind::text) {
      m.observation_modalities = {protocol::Modality::text};
      if (options_.max_image_history > 0) m.observation_modalities.insert(protocol::Modality::image);
    } else {
      m.observation_modalities = {protocol::Modality::tensor};
    }
    m.max_image_history = options_.max_image_history;
    return m;
  }

  // Returns false when the worker should exit.
  bool handle(const ProtocolMessage& cmd, Heartbeat& heartbeat) {
    switch (cmd.name) {
      case MessageName::reset: reset(cmd); return true;
      case MessageName::step: step(cmd, heartbeat); return true;
      case MessageName::select_action: select_action(cmd, heartbeat); return true;
      case MessageName::restore: restore(cmd); return true;
      case MessageName::stop: return options_.faults.ignore_stop;
      case MessageName::train:
        error(cmd.correlation_id, "train is not supported by built-in workers");
        return true;
      default:
        error(cmd.correlation_id, "unexpected message " + std::string(protocol::to_string(cmd.name)));
        return true;
    }
  }

  void error(std::uint64_t id, const std::string& message, const Json& extra = Json::object()) {
    Json p = extra;
    p["message"] = message;
    send(protocol::make_response(MessageName::error, id, std::move(p)));
  }

 private:
  void send(const ProtocolMessage& msg) {
    if (options_.faults.garbage_output) {
      out_.write_line("}}not json at all{{\n");
      return;
    }
    out_.send(msg);
  }

  Json ready_payload(bool restored) const {
    Json meta = task_->metadata();
    meta["slot"] = slot_;
    if (options_.faults.echo_identity) {
      meta["pid"] = static_cast<std::int64_t>(::getpid());
      const char* id = std::getenv("MOSAIC_WORKER_ID");
      meta["worker_id"] = id ? id : "";
    }
    Json p = protocol::ResponseReady{seed_, task_->tensor_shape, meta}.to_payload();
    p["episode_index"] = episode_index_;
    if (restored) {
      p["restored"] = true;
      p["step_index"] = env_ ? env_->step_index : counter_;
    }
    return p;
  }

  void setup(const std::string& task, const std::string& slot, const Json& settings) {
    task_ = &env::task_info(task);
    slot_ = slot.empty() ? task_->slots.front() : slot;
    if (std::find(task_->slots.begin(), task_->slots.end(), slot_) == task_->slots.end()) {
      throw ValidationError("slot", "unknown slot " + slot_ + " for " + task);
    }
    settings_ = settings;
    policy_ = make_policy(options_.kind, *task_, slot_, policy_settings_from(settings));
  }

  void reset(const ProtocolMessage& cmd) {
    const auto& p = cmd.payload;
    try {
      setup(p.value("task", std::string(env::kCorridorTask)), p.value("slot", std::string()),
            p.value("settings", Json::object()));
    } catch (const MosaicError& e) {
      error(cmd.correlation_id, e.what());
      return;
    }
    seed_ = p.at("seed").get<std::uint64_t>();
    episode_index_ = p.value("episode_index", std::uint64_t{0});
    checkpoint_every_ = p.value("checkpoint_every", std::uint32_t{0});
    render_ = p.value("render", std::string("none"));
    blob_dir_ = p.value("blob_dir", std::string());
    policy_->reset(seed_);
    env_ = env::make_env(task_->task_id, seed_, episode_index_);
    total_ = Reward{};
    episode_steps_ = 0;
    counter_ = 0;
    send(protocol::make_response(MessageName::ready, cmd.correlation_id, ready_payload(false)));
  }

  env::ObservationOptions obs_options() const {
    env::ObservationOptions o;
    o.modality = policy_->modality();
    if (o.modality == ObservationModality::text && options_.max_image_history > 0) {
      o.modality = ObservationModality::text_image;
      o.max_image_history = options_.max_image_history;
    }
    if (auto it = settings_.find("observation_mode"); it != settings_.end() && it->is_string()) {
      o.mode = env::observation_mode_from_string(it->get<std::string>()).value_or(o.mode);
    }
    return o;
  }

  Json checkpoint(std::uint64_t step_index) const {
    Json blob{{"v", 1},
              {"task", task_->task_id},
              {"slot", slot_},
              {"seed", seed_},
              {"episode_index", episode_index_},
              {"counter", counter_},
              {"episode_steps", episode_steps_},
              {"total_reward_milli", total_.milli()},
              {"checkpoint_every", checkpoint_every_},
              {"settings", settings_},
              {"policy_rng", policy_->rng().state_words()}};
    if (env_) blob["env"] = base64_encode(env::encode_state(*env_));
    const std::string bytes = canonical_dump(blob);
    return Json{{"state", base64_encode(as_bytes(bytes))},
                {"digest", sha256_hex(bytes)},
                {"episode_index", episode_index_},
                {"step_index", step_index}};
  }

  bool due(std::uint64_t step_index) const {
    return checkpoint_every_ > 0 && step_index > 0 && step_index % checkpoint_every_ == 0;
  }

  // Fault hooks fire on the n-th step (or the n-th decision for select_action).
  void inject_faults(std::uint64_t n, Heartbeat& heartbeat) {
    const auto& faults = options_.faults;
    if (faults.silent_at_step && *faults.silent_at_step == n && claim_marker(faults.marker_file)) {
      heartbeat.silence();
      for (;;) ::pause();
    }
    if (faults.crash_at_step && *faults.crash_at_step == n && claim_marker(faults.marker_file)) {
      ::_exit(3);
    }
  }

  void step(const ProtocolMessage& cmd, Heartbeat& heartbeat) {
    if (!env_ || !policy_) return error(cmd.correlation_id, "step before reset");
    if (task_->slots.size() != 1) {
      return error(cmd.correlation_id, "step needs a single-agent task; use select_action");
    }
    const auto& faults = options_.faults;
    inject_faults(env_->step_index + 1, heartbeat);
    if (env_->done()) {
      if (faults.omit_episode_end) {
        send(protocol::make_response(MessageName::step_result, cmd.correlation_id,
                                     Json{{"action", 0}, {"reward", 0.0}, {"terminated", true}}));
        return;
      }
      Json p = protocol::ResponseEpisodeEnd{total_, static_cast<std::int64_t>(episode_steps_)}.to_payload();
      if (checkpoint_every_ > 0) p["checkpoint"] = checkpoint(env_->step_index);
      send(protocol::make_response(MessageName::episode_end, cmd.correlation_id, std::move(p)));
      return;
    }
    auto obs = env::serialize_obs(*env_, slot_, obs_options());
    PolicyReply reply = policy_->act(obs, env_->step_index);
    int action = reply.action;
    if (auto it = cmd.payload.find("action"); it != cmd.payload.end()) {
      if (!it->is_number_integer() || it->get<std::int64_t>() < 0 ||
          it->get<std::int64_t>() >= task_->num_actions()) {
        return error(cmd.correlation_id, "forced action out of range", Json{{"field", "action"}});
      }
      action = it->get<int>();
    }
    auto result = env::step_parallel(*env_, {{slot_, action}});
    env_ = result.state;
    const auto& t = result.transitions.front();
    total_ += t.reward;
    ++episode_steps_;
    Json p{{"action", action},
           {"reward", t.reward.to_double()},
           {"terminated", t.terminated},
           {"truncated", t.truncated},
           {"step_index", env_->step_index}};
    if (reply.text) p["text"] = *reply.text;
    if (render_ == "ascii" || render_ == "rgb") {
      const bool ascii = render_ == "ascii";
      std::vector<std::int64_t> shape = ascii ? std::vector<std::int64_t>{env_->height, env_->width + 1}
                                              : std::vector<std::int64_t>{env_->height * env::kTileSize,
                                                                          env_->width * env::kTileSize, 3};
      p["render"] = protocol::make_render_payload(
          render_, shape, env::render(*env_, ascii ? env::RenderMode::ascii : env::RenderMode::rgb), blob_dir_);
    }
    if (due(env_->step_index)) p["checkpoint"] = checkpoint(env_->step_index);
    send(protocol::make_response(MessageName::step_result, cmd.correlation_id, std::move(p)));
  }

  void select_action(const ProtocolMessage& cmd, Heartbeat& heartbeat) {
    if (!policy_) return error(cmd.correlation_id, "select_action before reset");
    inject_faults(counter_ + 1, heartbeat);
    ObservationPayload obs;
    try {
      obs = ObservationPayload::from_json(cmd.payload.at("observation"));
    } catch (const MosaicError& e) {
      return error(cmd.correlation_id, e.what(), Json{{"field", "observation"}});
    }
    std::uint64_t step_index = counter_;
    if (auto info = cmd.payload.find("info"); info != cmd.payload.end() && info->contains("step_index")) {
      step_index = info->at("step_index").get<std::uint64_t>();
    }
    PolicyReply reply;
    try {
      reply = policy_->act(obs, step_index);
    } catch (const std::exception& e) {
      return error(cmd.correlation_id, std::string("policy cannot use this observation: ") + e.what());
    }
    ++counter_;
    Json p{{"action", reply.action}, {"reward", 0.0}, {"terminated", false}};
    if (reply.text) p["text"] = *reply.text;
    if (due(counter_)) p["checkpoint"] = checkpoint(counter_);
    send(protocol::make_response(MessageName::step_result, cmd.correlation_id, std::move(p)));
  }

  void restore(const ProtocolMessage& cmd) {
    auto bytes = base64_decode(cmd.payload.at("state").get<std::string>());
    if (!bytes) return error(cmd.correlation_id, "checkpoint state is not base64", Json{{"field", "state"}});
    if (sha256_hex(std::span<const std::uint8_t>(*bytes)) != cmd.payload.at("digest").get<std::string>()) {
      return error(cmd.correlation_id, "checkpoint digest mismatch", Json{{"field", "digest"}});
    }
    try {
      Json blob = Json::parse(bytes->begin(), bytes->end());
      setup(blob.at("task").get<std::string>(), blob.at("slot").get<std::string>(), blob.at("settings"));
      seed_ = blob.at("seed").get<std::uint64_t>();
      episode_index_ = blob.at("episode_index").get<std::uint64_t>();
      counter_ = blob.at("counter").get<std::uint64_t>();
      episode_steps_ = blob.at("episode_steps").get<std::uint64_t>();
      total_ = Reward::from_milli(blob.at("total_reward_milli").get<std::int64_t>());
      checkpoint_every_ = blob.at("checkpoint_every").get<std::uint32_t>();
      policy_->set_rng(Rng::from_state_words(blob.at("policy_rng").get<std::vector<std::uint64_t>>()));
      if (blob.contains("env")) {
        auto env_bytes = base64_decode(blob.at("env").get<std::string>());
        if (!env_bytes) throw ValidationError("state.env", "not base64");
        env_ = env::decode_state(*env_bytes);
      } else {
        env_.reset();
      }
    } catch (const std::exception& e) {
      return error(cmd.correlation_id, std::string("cannot restore checkpoint: ") + e.what(),
                   Json{{"field", "state"}});
    }
    send(protocol::make_response(MessageName::ready, cmd.correlation_id, ready_payload(true)));
  }

  const WorkerOptions& options_;
  Output& out_;
  const env::TaskInfo* task_ = nullptr;
  std::string slot_;
  Json settings_ = Json::object();
  std::unique_ptr<Policy> policy_;
  std::optional<env::EnvState> env_;
  std::uint64_t seed_ = 0;
  std::uint64_t episode_index_ = 0;
  std::uint64_t counter_ = 0;
  std::uint64_t episode_steps_ = 0;
  std::uint32_t checkpoint_every_ = 0;
  Reward total_;
  std::string render_ = "none";
  std::string blob_dir_;
};

std::optional<std::uint64_t> correlation_of(const std::string& raw) {
  Json doc = parse_json_or_discard(raw);
  if (doc.is_object()) {
    if (auto it = doc.find("correlation_id"); it != doc.end() && it->is_number_unsigned()) {
      return it->get<std::uint64_t>();
    }
  }
  return std::nullopt;
}

}  // namespace

double heartbeat_secs_from_env(double fallback) {
  if (const char* v = std::getenv("MOSAIC_HEARTBEAT_SECS")) {
    char* end = nullptr;
    double secs = std::strtod(v, &end);
    if (end != v && secs > 0) return secs;
  }
  return fallback;
}

int run_worker(const WorkerOptions& options, int in_fd, int out_fd) {
  ::signal(SIGPIPE, SIG_IGN);
  if (options.faults.ignore_stop) ::signal(SIGTERM, SIG_IGN);
  if (options.faults.spawn_grandchild) {
    if (::fork() == 0) {
      for (;;) ::pause();
    }
  }
  Output out(out_fd);
  Session session(options, out);
  if (options.faults.garbage_handshake) {
    out.write_line("hello, I am not speaking the protocol\n");
  } else {
    out.send(session.manifest().to_message());
  }
  std::optional<Heartbeat> heartbeat_storage;
  heartbeat_storage.emplace(out, options.faults.no_heartbeat ? 1e9 : options.heartbeat_secs);
  Heartbeat& heartbeat = *heartbeat_storage;

  protocol::LineSplitter splitter(protocol::kMaxLineBytes);
  char buf[65536];
  for (;;) {
    auto n = ::read(in_fd, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return 0;
    for (auto& line : splitter.feed(std::string_view(buf, static_cast<std::size_t>(n)))) {
      if (line.oversized) {
        session.error(0, "line exceeds 1 MiB", Json{{"failure", "framing"}});
        continue;
      }
      auto decoded = protocol::decode_message(line.text);
      if (auto* err = std::get_if<protocol::DecodeError>(&decoded)) {
        Json extra{{"failure", protocol::to_string(err->failure)}};
        if (!err->field.empty()) extra["field"] = err->field;
        session.error(correlation_of(line.text).value_or(0), err->detail.empty() ? "malformed command" : err->detail,
                      extra);
        continue;
      }
      auto& msg = std::get<ProtocolMessage>(decoded);
      if (msg.kind != protocol::MessageKind::command) {
        session.error(msg.correlation_id, "workers only accept commands");
        continue;
      }
      if (!session.handle(msg, heartbeat)) return 0;
    }
  }
}

}  // namespace mosaic::worker
