#include "mosaic/conformance/conformance.hpp"

#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <deque>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "mosaic/env/env.hpp"
#include "mosaic/protocol/capability.hpp"
#include "mosaic/protocol/framing.hpp"
#include "mosaic/protocol/message.hpp"
#include "mosaic/supervisor/process.hpp"

namespace mosaic::conformance {

using protocol::MessageName;
using protocol::ProtocolMessage;
using namespace std::chrono_literals;

bool Report::passed() const { return !first_failure(); }

std::optional<std::string> Report::first_failure() const {
  for (const auto& c : checks) {
    if (c.mandatory && !c.passed) return c.name;
  }
  return std::nullopt;
}

Json Report::to_json() const {
  Json checks_json = Json::array();
  for (const auto& c : checks) {
    checks_json.push_back(
        Json{{"name", c.name}, {"mandatory", c.mandatory}, {"passed", c.passed}, {"detail", c.detail}});
  }
  Json j{{"worker", worker}, {"passed", passed()}, {"checks", checks_json}};
  j["first_failure"] = first_failure() ? Json(*first_failure()) : Json(nullptr);
  return j;
}

namespace {

class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw CheckFailed(what);
}

// Raw line channel to one worker process. Heartbeats are set aside with
// their arrival time; everything else is returned to the caller.
class Channel {
 public:
  Channel(const Options& options, std::shared_ptr<Clock> clock) : options_(options), clock_(std::move(clock)) {
    supervisor::LaunchSpec spec;
    spec.executable = options.worker;
    spec.args = options.args;
    const double real_secs =
        std::chrono::duration<double>(clock_->to_real(options.heartbeat_interval)).count();
    std::ostringstream secs;
    secs << real_secs;
    spec.env_vars["MOSAIC_HEARTBEAT_SECS"] = secs.str();
    child_ = supervisor::launch(spec);
  }

  ~Channel() {
    if (child_.stdin_fd >= 0) ::close(child_.stdin_fd);
    if (child_.stdout_fd >= 0) ::close(child_.stdout_fd);
    if (!exited_) {
      supervisor::signal_group(child_.pgid, SIGKILL);
      supervisor::reap(child_.pid);
    }
  }

  void send_line(const std::string& line) {
    std::size_t off = 0;
    while (off < line.size()) {
      auto n = ::write(child_.stdin_fd, line.data() + off, line.size() - off);
      if (n < 0 && errno == EINTR) continue;
      expect(n > 0, "worker closed its input");
      off += static_cast<std::size_t>(n);
    }
  }

  std::uint64_t send(MessageName name, Json payload = Json::object()) {
    const auto id = ++next_id_;
    send_line(protocol::encode_message(protocol::make_command(name, id, std::move(payload))));
    return id;
  }

  /// Next non-heartbeat line, decoded. Throws CheckFailed on timeout, EOF
  /// or an undecodable line.
  ProtocolMessage next(Duration timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      while (!lines_.empty()) {
        auto line = std::move(lines_.front());
        lines_.pop_front();
        auto decoded = protocol::decode_message(line);
        if (auto* err = std::get_if<protocol::DecodeError>(&decoded)) {
          throw CheckFailed("undecodable response (" + std::string(protocol::to_string(err->failure)) +
                            "): " + line.substr(0, 120));
        }
        auto msg = std::get<ProtocolMessage>(std::move(decoded));
        expect(msg.kind == protocol::MessageKind::response, "worker sent a command");
        if (msg.name == MessageName::heartbeat) {
          heartbeats_.push_back({clock_->now(), msg.payload.value("seq", std::uint64_t{0})});
          continue;
        }
        return msg;
      }
      if (!pump(deadline)) throw CheckFailed("no response within the timeout");
    }
  }

  /// Drains output for `d` of real time, keeping heartbeats only.
  void idle(Duration d) {
    const auto deadline = std::chrono::steady_clock::now() + d;
    while (std::chrono::steady_clock::now() < deadline) {
      if (!pump(deadline)) break;
      while (!lines_.empty()) {
        auto line = std::move(lines_.front());
        lines_.pop_front();
        auto decoded = protocol::decode_message(line);
        auto* msg = std::get_if<ProtocolMessage>(&decoded);
        expect(msg && msg->name == MessageName::heartbeat, "unsolicited non-heartbeat output while idle");
        heartbeats_.push_back({clock_->now(), msg->payload.value("seq", std::uint64_t{0})});
      }
    }
  }

  /// Waits up to `d` for the process to exit.
  std::optional<supervisor::ExitStatus> wait_exit(Duration d) {
    const auto deadline = std::chrono::steady_clock::now() + d;
    while (std::chrono::steady_clock::now() < deadline) {
      if (auto st = supervisor::try_reap(child_.pid)) {
        exited_ = true;
        return st;
      }
      std::this_thread::sleep_for(10ms);
    }
    return std::nullopt;
  }

  struct Beat {
    Timestamp at;
    std::uint64_t seq = 0;
  };
  const std::vector<Beat>& heartbeats() const { return heartbeats_; }
  void clear_heartbeats() { heartbeats_.clear(); }
  const Clock& clock() const { return *clock_; }

 private:
  bool pump(std::chrono::steady_clock::time_point deadline) {
    if (eof_) return false;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return false;
    pollfd pfd{child_.stdout_fd, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0 && errno == EINTR) return true;
    if (rc <= 0) return false;
    char buf[65536];
    auto n = ::read(child_.stdout_fd, buf, sizeof buf);
    if (n <= 0) {
      eof_ = true;
      return false;
    }
    for (auto& l : splitter_.feed(std::string_view(buf, static_cast<std::size_t>(n)))) {
      lines_.push_back(l.oversized ? std::string("<oversized>") : std::move(l.text));
    }
    return true;
  }

  const Options& options_;
  std::shared_ptr<Clock> clock_;
  supervisor::ChildProcess child_;
  protocol::LineSplitter splitter_{protocol::kMaxLineBytes};
  std::deque<std::string> lines_;
  std::vector<Beat> heartbeats_;
  std::uint64_t next_id_ = 0;
  bool eof_ = false;
  bool exited_ = false;
};

const std::uint64_t kSeed = 42;

struct StepView {
  std::int64_t action = 0;
  std::int64_t reward_milli = 0;
  bool terminated = false;
  bool truncated = false;
  std::uint64_t step_index = 0;

  friend bool operator==(const StepView&, const StepView&) = default;
  std::string str() const {
    return "{action " + std::to_string(action) + ", reward_milli " + std::to_string(reward_milli) +
           ", terminated " + std::to_string(terminated) + ", truncated " + std::to_string(truncated) +
           ", step_index " + std::to_string(step_index) + "}";
  }
};

struct Episode {
  std::vector<StepView> steps;
  std::vector<Json> checkpoints;  // in arrival order, each tagged with its step index
  std::optional<ProtocolMessage> end;
  std::string end_problem;
};

ProtocolMessage answer(Channel& ch, std::uint64_t id, Duration timeout) {
  auto msg = ch.next(timeout);
  expect(msg.correlation_id == id, "correlation_id " + std::to_string(msg.correlation_id) + " answers command " +
                                       std::to_string(id));
  if (msg.name == MessageName::error) {
    throw CheckFailed("error response: " + msg.payload.value("message", std::string("?")));
  }
  return msg;
}

ProtocolMessage reset(Channel& ch, const Options& o, std::uint32_t checkpoint_every) {
  const auto id = ch.send(MessageName::reset, Json{{"seed", kSeed},
                                                   {"task", std::string(env::kCorridorTask)},
                                                   {"checkpoint_every", checkpoint_every}});
  auto msg = answer(ch, id, o.response_timeout);
  expect(msg.name == MessageName::ready, "reset answered with " + std::string(protocol::to_string(msg.name)));
  return msg;
}

StepView view_of(const ProtocolMessage& msg) {
  StepView v;
  auto typed = protocol::ResponseStep::from_message(msg);
  v.action = typed.action;
  v.reward_milli = typed.reward.milli();
  v.terminated = typed.terminated;
  v.truncated = msg.payload.value("truncated", false);
  v.step_index = msg.payload.value("step_index", std::uint64_t{0});
  return v;
}

// Steps until the episode signals its end (or the horizon is overrun), then
// sends one more step, which must be answered with episode_end.
Episode play(Channel& ch, const Options& o) {
  const auto& info = env::task_info(env::kCorridorTask);
  Episode ep;
  for (int i = 0; i <= info.horizon; ++i) {
    auto msg = answer(ch, ch.send(MessageName::step), o.response_timeout);
    expect(msg.name == MessageName::step_result,
           "step " + std::to_string(i + 1) + " answered with " + std::string(protocol::to_string(msg.name)));
    auto v = view_of(msg);
    expect(v.action >= 0 && v.action < info.num_actions(), "action " + std::to_string(v.action) + " out of range");
    expect(v.reward_milli == 0 || v.reward_milli == 1000, "corridor reward outside {0, 1}");
    ep.steps.push_back(v);
    if (auto it = msg.payload.find("checkpoint"); it != msg.payload.end()) ep.checkpoints.push_back(*it);
    if (v.terminated || v.truncated) break;
  }
  expect(ep.steps.size() <= static_cast<std::size_t>(info.horizon), "episode ran past the horizon");
  try {
    auto end = answer(ch, ch.send(MessageName::step), o.response_timeout);
    if (end.name == MessageName::episode_end) {
      ep.end = end;
    } else {
      ep.end_problem = "step after the final step answered with " + std::string(protocol::to_string(end.name));
    }
  } catch (const CheckFailed& e) {
    ep.end_problem = e.what();
  }
  return ep;
}

std::vector<StepView> load_transcript(const std::filesystem::path& path) {
  std::ifstream in(path);
  expect(in.good(), "cannot read transcript " + path.string());
  Json doc = Json::parse(in);
  std::vector<StepView> out;
  for (const auto& s : doc.at("steps")) {
    StepView v;
    v.action = s.at("action").get<std::int64_t>();
    v.reward_milli = Reward::from_double(s.at("reward").get<double>()).milli();
    v.terminated = s.at("terminated").get<bool>();
    v.truncated = s.at("truncated").get<bool>();
    v.step_index = s.at("step_index").get<std::uint64_t>();
    out.push_back(v);
  }
  return out;
}

std::string describe_diff(const std::vector<StepView>& want, const std::vector<StepView>& got) {
  for (std::size_t i = 0; i < std::max(want.size(), got.size()); ++i) {
    if (i >= want.size()) return "extra step " + std::to_string(i + 1) + ": " + got[i].str();
    if (i >= got.size()) return "missing step " + std::to_string(i + 1) + ": " + want[i].str();
    if (!(want[i] == got[i])) {
      return "step " + std::to_string(i + 1) + ": expected " + want[i].str() + ", got " + got[i].str();
    }
  }
  return "identical";
}

class Suite {
 public:
  explicit Suite(const Options& o) : o_(o) { report_.worker = o.worker.string(); }

  void run(const std::string& name, bool mandatory, const std::vector<std::string>& needs,
           const std::function<std::string()>& body) {
    Check c{name, mandatory, false, ""};
    for (const auto& n : needs) {
      if (!passed(n)) {
        c.detail = "skipped: " + n + " failed";
        report_.checks.push_back(std::move(c));
        return;
      }
    }
    try {
      c.detail = body();
      c.passed = true;
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    report_.checks.push_back(std::move(c));
  }

  bool passed(const std::string& name) const {
    for (const auto& c : report_.checks) {
      if (c.name == name) return c.passed;
    }
    return false;
  }

  Report take() { return std::move(report_); }

 private:
  const Options& o_;
  Report report_;
};

}  // namespace

Report run_suite(const Options& o) {
  Suite suite(o);
  auto clock = std::make_shared<ScaledClock>(o.clock_scale);
  std::unique_ptr<Channel> ch;
  std::optional<protocol::CapabilityManifest> manifest;
  Episode first;
  const auto& corridor = env::task_info(env::kCorridorTask);

  suite.run("handshake", true, {}, [&] {
    try {
      ch = std::make_unique<Channel>(o, clock);
    } catch (const std::exception& e) {
      throw CheckFailed(std::string("cannot start worker: ") + e.what());
    }
    auto msg = ch->next(o.response_timeout);
    expect(msg.name == MessageName::handshake, "first line is " + std::string(protocol::to_string(msg.name)));
    expect(msg.correlation_id == 0, "handshake correlation_id must be 0");
    manifest = protocol::CapabilityManifest::from_message(msg);
    auto problems = manifest->violations();
    expect(problems.empty(), problems.empty() ? "" : problems.front());
    for (auto c : {MessageName::reset, MessageName::step, MessageName::stop, MessageName::restore}) {
      expect(manifest->supported_commands.count(c) == 1,
             "handshake does not advertise " + std::string(protocol::to_string(c)));
    }
    expect(manifest->schema_version.major == protocol::kProtocolVersion.major, "schema major version differs");
    return "worker_kind " + std::string(protocol::to_string(manifest->worker_kind));
  });

  suite.run("reset_seed_42", true, {"handshake"}, [&] {
    auto ready = protocol::ResponseReady::from_message(reset(*ch, o, 0));
    expect(ready.seed == kSeed, "ready echoes seed " + std::to_string(ready.seed));
    expect(ready.observation_shape == corridor.tensor_shape, "observation_shape differs from the task's");
    return std::string("ready");
  });

  suite.run("steps", true, {"reset_seed_42"}, [&] {
    first = play(*ch, o);
    for (std::size_t i = 0; i < first.steps.size(); ++i) {
      if (first.steps[i].step_index != 0) {
        expect(first.steps[i].step_index == i + 1, "step_index does not count up from 1");
      }
      const bool last = i + 1 == first.steps.size();
      expect(last == (first.steps[i].terminated || first.steps[i].truncated),
             "episode ended at step " + std::to_string(i + 1) + " without a terminal flag");
    }
    return std::to_string(first.steps.size()) + " steps";
  });

  suite.run("episode_end", true, {"steps"}, [&] {
    expect(first.end.has_value(), "no episode_end after the final step: " + first.end_problem);
    auto end = protocol::ResponseEpisodeEnd::from_message(*first.end);
    std::int64_t total = 0;
    for (const auto& s : first.steps) total += s.reward_milli;
    expect(end.total_reward.milli() == total, "total_reward differs from the summed step rewards");
    expect(end.episode_length == static_cast<std::int64_t>(first.steps.size()),
           "episode_length " + std::to_string(end.episode_length) + " differs from " +
               std::to_string(first.steps.size()) + " steps");
    return "total_reward_milli " + std::to_string(total);
  });

  suite.run("determinism", true, {"episode_end"}, [&] {
    reset(*ch, o, 0);
    auto again = play(*ch, o);
    expect(again.steps == first.steps, "second episode differs: " + describe_diff(first.steps, again.steps));
    return std::string("identical");
  });

  suite.run("transcript", o.transcript.has_value(), {"steps"}, [&] {
    if (!o.transcript) return std::string("no transcript given");
    auto want = load_transcript(*o.transcript);
    expect(want == first.steps, describe_diff(want, first.steps));
    return std::to_string(want.size()) + " steps match";
  });

  suite.run("restore_round_trip", true, {"episode_end"}, [&] {
    reset(*ch, o, 2);
    auto full = play(*ch, o);
    expect(!full.checkpoints.empty(), "no checkpoint offered with checkpoint_every 2");
    const Json& cp = full.checkpoints.front();
    const auto at = cp.at("step_index").get<std::uint64_t>();
    expect(at > 0 && at <= full.steps.size(), "checkpoint step_index out of range");
    auto id = ch->send(MessageName::restore, Json{{"state", cp.at("state")}, {"digest", cp.at("digest")}});
    auto restored = answer(*ch, id, o.response_timeout);
    expect(restored.name == MessageName::ready, "restore answered with " +
                                                    std::string(protocol::to_string(restored.name)));
    auto resumed = play(*ch, o);
    std::vector<StepView> suffix(full.steps.begin() + static_cast<std::ptrdiff_t>(at), full.steps.end());
    expect(resumed.steps == suffix, "resumed stream differs: " + describe_diff(suffix, resumed.steps));

    auto bad = ch->send(MessageName::restore, Json{{"state", cp.at("state")}, {"digest", std::string(64, '0')}});
    auto refused = ch->next(o.response_timeout);
    expect(refused.correlation_id == bad && refused.name == MessageName::error,
           "a checkpoint with a wrong digest was not refused");
    return "resumed at step " + std::to_string(at);
  });

  suite.run("malformed_command", true, {"handshake"}, [&] {
    ch->send_line("{\"cmd\": \"step\", \"correlation_id\": 9000, \"v\": \"1.0.0\", \"action\": \"left\"}\n");
    auto msg = ch->next(o.response_timeout);
    expect(msg.name == MessageName::error, "malformed command answered with " +
                                               std::string(protocol::to_string(msg.name)));
    ch->send_line("not json\n");
    msg = ch->next(o.response_timeout);
    expect(msg.name == MessageName::error, "garbage line answered with " + std::string(protocol::to_string(msg.name)));
    reset(*ch, o, 0);
    return std::string("errors reported, worker still serving");
  });

  suite.run("heartbeat_timing", true, {"handshake"}, [&] {
    ch->clear_heartbeats();
    const auto start = ch->clock().now();
    const Duration window = o.heartbeat_interval * 4;
    ch->idle(clock->to_real(window));
    const auto& beats = ch->heartbeats();
    expect(beats.size() >= 3, std::to_string(beats.size()) + " heartbeats in four intervals");
    Timestamp prev = start;
    Duration worst{0};
    for (std::size_t i = 0; i < beats.size(); ++i) {
      if (i > 0) expect(beats[i].seq > beats[i - 1].seq, "heartbeat seq not increasing");
      worst = std::max(worst, beats[i].at - prev);
      prev = beats[i].at;
    }
    worst = std::max(worst, (start + window) - prev);
    const auto worst_s = std::chrono::duration<double>(worst).count();
    expect(worst <= o.heartbeat_interval, "longest silence " + std::to_string(worst_s) + " s exceeds the interval");
    return std::to_string(beats.size()) + " heartbeats, longest silence " + std::to_string(worst_s) + " s";
  });

  suite.run("stop", true, {"handshake"}, [&] {
    ch->send(MessageName::stop);
    auto st = ch->wait_exit(2s);
    expect(st.has_value(), "worker still running 2 s after stop");
    expect(st->exit_code && *st->exit_code == 0, "worker did not exit cleanly after stop");
    return std::string("exit 0");
  });

  return suite.take();
}

}  // namespace mosaic::conformance
