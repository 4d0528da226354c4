// Prints one PASS/FAIL line per acceptance criterion and exits non-zero if
// any criterion fails.
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include "../support/generators.hpp"
#include "mosaic/conformance/conformance.hpp"
#include "mosaic/evaluation/matrix.hpp"
#include "mosaic/evaluation/run.hpp"
#include "mosaic/evaluation/session.hpp"
#include "mosaic/operators/config.hpp"
#include "mosaic/protocol/message.hpp"
#include "mosaic/supervisor/supervisor.hpp"
#include "mosaic/telemetry/store.hpp"
#include "mosaic/util/digest.hpp"

using namespace mosaic;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = MOSAIC_SOURCE_DIR;
const fs::path kBuild = MOSAIC_BINARY_DIR;
const fs::path kWorker = kBuild / "tools" / "mosaic_worker";
const fs::path kFault = kBuild / "tests" / "fault_worker";
const fs::path kCli = kBuild / "tools" / "mosaic";

struct Verdict {
  bool passed = false;
  std::string detail;
};

fs::path fresh_dir(const std::string& name) {
  auto dir = kBuild / "test_runs" / "acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s.precision(precision);
  s << std::fixed << v;
  return s.str();
}

Verdict shared_seed_determinism() {
  const auto root = fresh_dir("determinism");
  double slowest = 0;
  for (const char* side : {"a", "b"}) {
    const auto cmd = kCli.string() + " run --config teamtag_4random --seed 0 --episodes 100 --home " +
                     (root / side).string() + " >" + (root / side).string() + ".json 2>/dev/null";
    const auto t0 = std::chrono::steady_clock::now();
    if (std::system(cmd.c_str()) != 0) return {false, std::string("run ") + side + " exited non-zero"};
    slowest = std::max(slowest, seconds_since(t0));
  }
  const auto id = Json::parse(slurp(root / "a.json"))["run_id"].get<std::string>();
  std::size_t differing = 0;
  std::string sizes;
  for (const char* stream : {"steps.jsonl", "episodes.jsonl"}) {
    const auto a = slurp(root / "a" / "runs" / id / stream);
    const auto b = slurp(root / "b" / "runs" / id / stream);
    if (a.empty()) return {false, std::string(stream) + " is empty"};
    for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
      if (i >= a.size() || i >= b.size() || a[i] != b[i]) ++differing;
    }
    sizes += std::string(stream) + " " + std::to_string(a.size()) + " B, ";
  }
  return {differing == 0 && slowest < 60.0,
          sizes + std::to_string(differing) + " bytes differ, slowest run " + fmt(slowest, 1) + " s (limit 60 s)"};
}

operators::RunConfig teamtag(const std::string& id, std::map<std::string, std::pair<operators::Paradigm, Json>> slots) {
  operators::RunConfig c;
  c.operator_id = id;
  c.task = std::string(env::kTeamTagTask);
  for (auto& [slot, spec] : slots) {
    operators::WorkerAssignment a;
    a.agent_slot = slot;
    a.worker_type = spec.first;
    a.settings = spec.second;
    a.frozen = spec.first == operators::Paradigm::rl;
    c.player_workers[slot] = a;
  }
  return operators::RunConfig::from_json(c.to_json());
}

Verdict lock_step() {
  using operators::Paradigm;
  const Json greedy{{"algorithm", "greedy"}};
  const Json llm{{"model_id", "scripted"}, {"temperature", 0}};
  const Json random{{"kind", "random"}};
  std::vector<operators::RunConfig> ops{
      teamtag("mixed", {{"blue_0", {Paradigm::rl, greedy}},
                        {"blue_1", {Paradigm::baseline, random}},
                        {"green_0", {Paradigm::llm, llm}},
                        {"green_1", {Paradigm::rl, greedy}}}),
      teamtag("text", {{"blue_0", {Paradigm::llm, llm}},
                       {"blue_1", {Paradigm::vlm, llm}},
                       {"green_0", {Paradigm::llm, llm}},
                       {"green_1", {Paradigm::vlm, llm}}}),
      teamtag("baselines", {{"blue_0", {Paradigm::baseline, random}},
                            {"blue_1", {Paradigm::baseline, Json{{"kind", "noop"}}}},
                            {"green_0", {Paradigm::baseline, Json{{"kind", "cycle"}}}},
                            {"green_1", {Paradigm::rl, greedy}}}),
  };
  evaluation::SessionOptions options;
  options.session_id = "lockstep";
  options.run_dir = fresh_dir("lockstep");
  options.worker_executable = kWorker;
  auto session = evaluation::ManualSession::open(ops, std::string(env::kTeamTagTask), 0, options);
  std::size_t violations = 0;
  std::uint64_t resets = 0;
  for (std::uint64_t b = 1; b <= 200; ++b) {
    if (!session->step().advanced) return {false, "barrier " + std::to_string(b) + " did not advance"};
    const auto steps = session->replica_steps();
    if (std::set<std::uint64_t>(steps.begin(), steps.end()).size() != 1 || steps[0] != b) ++violations;
  }
  for (std::size_t r = 0; r < session->replica_count(); ++r) resets += session->episode_index(r);
  session->stop();
  return {violations == 0, "3 replicas x 200 barriers, " + std::to_string(violations) + " violations, " +
                               std::to_string(resets) + " episode rollovers"};
}

supervisor::WorkerSpec corridor_worker(const std::string& name, std::vector<std::string> args) {
  supervisor::WorkerSpec spec;
  spec.name = name;
  spec.executable = kFault;
  spec.args = std::move(args);
  spec.heartbeat_interval = 60s;
  spec.liveness_window = 300s;
  spec.required.supported_commands = {protocol::MessageName::reset, protocol::MessageName::step,
                                      protocol::MessageName::restore};
  return spec;
}

Json corridor_reset(std::uint64_t seed) {
  return Json{{"seed", seed}, {"task", std::string(env::kCorridorTask)}, {"checkpoint_every", 2}};
}

std::string wire(protocol::ProtocolMessage m) {
  m.correlation_id = 0;
  return protocol::encode_message(m);
}

std::vector<std::string> corridor_episode(supervisor::Supervisor& sup, const std::string& id) {
  std::vector<std::string> lines;
  for (;;) {
    auto r = sup.request(id, protocol::MessageName::step);
    lines.push_back(wire(r));
    if (r.name == protocol::MessageName::episode_end) return lines;
  }
}

Verdict heartbeat_window() {
  constexpr double kScale = 120.0;
  constexpr auto kTick = 50ms;
  const Duration tick_scaled = std::chrono::duration_cast<Duration>(kTick * kScale);
  auto clock = std::make_shared<ScaledClock>(kScale);

  // Liveness verdicts for a worker that never beats.
  std::mutex mu;
  std::vector<supervisor::LivenessEvent> events;
  supervisor::SupervisorOptions o;
  o.run_dir = fresh_dir("heartbeat");
  o.clock = clock;
  o.on_event = [&](const supervisor::LivenessEvent& e) {
    std::lock_guard lock(mu);
    events.push_back(e);
  };
  supervisor::Supervisor sup(o);
  const auto silent = sup.spawn(corridor_worker("silent", {"--no-heartbeat"}));
  {
    supervisor::MonitorThread monitor(sup, kTick);
    const auto deadline = std::chrono::steady_clock::now() + 10s;
    while (std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(10ms);
      std::lock_guard lock(mu);
      if (!events.empty() && events.back().kind == supervisor::LivenessEvent::Kind::dead) break;
    }
  }
  std::optional<Duration> warned, died;
  for (const auto& e : events) {
    if (e.worker_id != silent) continue;
    if (e.kind == supervisor::LivenessEvent::Kind::missed_heartbeat && !warned) warned = e.silence;
    if (e.kind == supervisor::LivenessEvent::Kind::dead && !died) died = e.silence;
  }
  auto secs = [](Duration d) { return std::chrono::duration<double>(d).count(); };
  const bool warn_ok = warned && *warned >= 60s && *warned <= Duration(60s) + tick_scaled;
  const bool dead_ok = died && *died >= 300s && *died <= Duration(300s) + tick_scaled;
  std::string detail = "tick " + fmt(secs(tick_scaled), 1) + " s scaled; warning at " +
                       (warned ? fmt(secs(*warned), 1) + " s" : std::string("never")) + ", dead at " +
                       (died ? fmt(secs(*died), 1) + " s" : std::string("never"));

  // Checkpoint recovery on the same scaled clock.
  std::vector<std::string> reference;
  {
    supervisor::SupervisorOptions ro;
    ro.run_dir = fresh_dir("heartbeat_reference");
    ro.clock = clock;
    supervisor::Supervisor ref(ro);
    auto id = ref.spawn(corridor_worker("w", {"--kind", "random"}));
    ref.request(id, protocol::MessageName::reset, corridor_reset(7));
    reference = corridor_episode(ref, id);
  }
  std::vector<std::string> suffix;
  std::size_t checkpoints = 0;
  {
    supervisor::SupervisorOptions ro;
    ro.run_dir = fresh_dir("heartbeat_recovery");
    ro.clock = clock;
    supervisor::Supervisor rec(ro);
    auto id = rec.spawn(corridor_worker(
        "w", {"--kind", "random", "--silent-at-step", "5", "--marker", (ro.run_dir / "once").string()}));
    rec.request(id, protocol::MessageName::reset, corridor_reset(7));
    for (int i = 0; i < 4; ++i) rec.request(id, protocol::MessageName::step);
    try {
      rec.request(id, protocol::MessageName::step);
      return {false, detail + "; silenced step unexpectedly answered"};
    } catch (const supervisor::WorkerDeadError&) {
    }
    checkpoints = rec.checkpoints(id).size();
    rec.recover(id);
    suffix = corridor_episode(rec, id);
  }
  const bool from_checkpoint = checkpoints > 0;
  const bool suffix_ok = reference.size() > 4 &&
                         std::equal(suffix.begin(), suffix.end(), reference.begin() + 4, reference.end()) &&
                         suffix.size() == reference.size() - 4;
  detail += "; recovery from " + std::to_string(checkpoints) + " checkpoints, resumed suffix of " +
            std::to_string(suffix.size()) + "/" + std::to_string(reference.size()) + " lines " +
            (suffix_ok ? "identical" : "differs");
  return {warn_ok && dead_ok && from_checkpoint && suffix_ok, detail};
}

Verdict matrix_exactness() {
  using Comp = std::map<std::string, std::vector<std::string>>;
  const std::vector<Comp> adversarial{
      {{"green", {"RL", "RL"}}, {"blue", {"RL", "RL"}}},     {{"green", {"LLM", "LLM"}}, {"blue", {"LLM", "LLM"}}},
      {{"green", {"VLM", "VLM"}}, {"blue", {"VLM", "VLM"}}}, {{"green", {"RL", "RL"}}, {"blue", {"LLM", "LLM"}}},
      {{"green", {"RL", "RL"}}, {"blue", {"VLM", "VLM"}}},   {{"green", {"LLM", "LLM"}}, {"blue", {"VLM", "VLM"}}},
      {{"green", {"RL", "RL"}}, {"blue", {"rho", "rho"}}},
  };
  const std::vector<Comp> cooperative{
      {{"green", {"LLM", "RL"}}, {"blue", {"RL", "rho"}}}, {{"green", {"LLM", "RL"}}, {"blue", {"RL", "nu"}}},
      {{"green", {"RL", "VLM"}}, {"blue", {"RL", "rho"}}}, {{"green", {"RL", "VLM"}}, {"blue", {"RL", "nu"}}},
      {{"green", {"RL", "RL"}}, {"blue", {"RL", "RL"}}},   {{"green", {"LLM", "RL"}}, {"blue", {"RL", "RL"}}},
      {{"green", {"RL", "VLM"}}, {"blue", {"RL", "RL"}}},  {{"green", {"LLM", "RL"}}, {"blue", {"RL", "VLM"}}},
  };
  const auto out = fresh_dir("matrix");
  const auto cmd = kCli.string() + " matrix --family both --out " + out.string() + " >/dev/null 2>&1";
  if (std::system(cmd.c_str()) != 0) return {false, "matrix command failed"};
  std::size_t mismatches = 0, unfrozen = 0, files = 0;
  for (const auto& e : fs::directory_iterator(out)) (void)e, ++files;
  auto check = [&](const std::string& prefix, const std::vector<Comp>& expected) {
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const auto path = out / (prefix + std::to_string(i + 1) + ".config");
      if (!fs::exists(path)) {
        ++mismatches;
        continue;
      }
      const auto config = operators::RunConfig::load(path);
      if (evaluation::team_composition(config) != expected[i]) ++mismatches;
      if (prefix == "C") {
        for (const auto& [slot, w] : config.player_workers) {
          if (w.worker_type == operators::Paradigm::rl && !w.frozen) ++unfrozen;
        }
      }
    }
  };
  check("A", adversarial);
  check("C", cooperative);
  return {files == 15 && mismatches == 0 && unfrozen == 0,
          std::to_string(files) + " configs, " + std::to_string(mismatches) + " composition mismatches, " +
              std::to_string(unfrozen) + " unfrozen cooperative RL slots"};
}

Verdict greedy_vs_random() {
  using operators::Paradigm;
  const Json greedy{{"algorithm", "greedy"}};
  const Json random{{"kind", "random"}};
  auto config = teamtag("greedy_vs_random", {{"green_0", {Paradigm::rl, greedy}},
                                             {"green_1", {Paradigm::rl, greedy}},
                                             {"blue_0", {Paradigm::baseline, random}},
                                             {"blue_1", {Paradigm::baseline, random}}});
  config.seed = 0;
  config.episodes = 200;
  evaluation::RunOptions options;
  options.home = fresh_dir("sanity");
  options.worker_executable = kWorker;
  const auto result = evaluation::run_script(config, options);
  if (!result.ok()) return {false, "run " + result.status + ": " + result.error.value_or("")};
  const auto wins = result.wins.count("green") ? result.wins.at("green") : 0;
  const double rate = static_cast<double>(wins) / static_cast<double>(result.episodes);
  return {rate > 0.9, "greedy team won " + std::to_string(wins) + "/" + std::to_string(result.episodes) +
                          " (win-rate " + fmt(rate) + ", threshold 0.9)"};
}

Verdict phi_corpus() {
  const auto corpus = Json::parse(slurp(kSource / "fixtures" / "phi" / "corpus.json"));
  const auto& cases = corpus.at("cases");
  auto run_case = [&](const Json& c) -> std::pair<int, std::string> {
    const auto& sd = corpus.at("spaces").at(c.at("space").get<std::string>());
    operators::ActionSpace space;
    space.k = sd.at("k").get<int>();
    space.labels = sd.value("labels", std::vector<std::string>{});
    space.null_action = sd.value("null_action", 0);
    operators::ParsePolicy policy{*operators::grammar_from_string(c.at("grammar").get<std::string>()),
                                  *operators::fallback_from_string(c.at("fallback").get<std::string>())};
    Rng rng(c.at("seed").get<std::uint64_t>());
    try {
      auto parsed = operators::parse_action(c.at("text").get<std::string>(), space, policy, rng);
      return {parsed.action, std::string(operators::to_string(parsed.outcome))};
    } catch (const operators::ParseError&) {
      return {-1, "error"};
    }
  };
  std::size_t mismatches = 0, unstable = 0;
  for (const auto& c : cases) {
    const auto first = run_case(c);
    const auto& expect = c.at("expect");
    if (first.second != expect.at("outcome").get<std::string>()) ++mismatches;
    else if (expect.contains("action") && first.first != expect.at("action").get<int>()) ++mismatches;
    if (run_case(c) != first) ++unstable;
  }
  return {cases.size() == 50 && mismatches == 0 && unstable == 0,
          std::to_string(cases.size()) + " cases, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(unstable) + " non-deterministic on replay"};
}

Verdict protocol_fuzz() {
  using namespace protocol;
  testing::Gen g(77);
  std::size_t crashes = 0, reencode_failures = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string line;
    if (i % 2 == 0) {
      for (auto n = g.below(200); n > 0; --n) line.push_back(static_cast<char>(g.below(256)));
    } else {
      line = encode_message(testing::valid_message(g));
      for (auto m = 1 + g.below(4); m > 0 && !line.empty(); --m) {
        const auto pos = g.below(line.size());
        switch (g.below(3)) {
          case 0: line[pos] = static_cast<char>(g.below(256)); break;
          case 1: line.erase(pos, 1); break;
          default: line.insert(pos, 1, "{}[]\":,0-e"[g.below(10)]); break;
        }
      }
    }
    try {
      auto r = decode_message(line);
      if (auto* m = std::get_if<ProtocolMessage>(&r)) {
        if (!std::holds_alternative<ProtocolMessage>(decode_message(encode_message(*m)))) ++reencode_failures;
      }
    } catch (...) {
      ++crashes;
    }
  }
  testing::Gen v(20240601);
  std::size_t round_trip_failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto m = testing::valid_message(v);
    const auto line = encode_message(m);
    const auto r = decode_message(line);
    const auto* back = std::get_if<ProtocolMessage>(&r);
    if (!back || !(*back == m) || encode_message(*back) != line) ++round_trip_failures;
  }
  return {crashes == 0 && reencode_failures == 0 && round_trip_failures == 0,
          "10000 fuzzed lines: " + std::to_string(crashes) + " crashes, " + std::to_string(reencode_failures) +
              " unstable; 1000 round trips: " + std::to_string(round_trip_failures) + " failures"};
}

Verdict telemetry_self_heal() {
  using namespace telemetry;
  const auto dir = fresh_dir("telemetry");
  constexpr std::uint64_t kRecords = 6;
  std::vector<std::string> lines;
  auto record = [](std::uint64_t st) {
    StepRecord r;
    r.run_id = "heal";
    r.session_id = "main";
    r.step_index = st;
    r.slot = "agent_0";
    r.paradigm = "Baseline";
    r.action = static_cast<std::int64_t>(st % 3);
    r.reward = Reward::from_milli(static_cast<std::int64_t>(st) * 250);
    r.obs_digest = sha256_hex(std::to_string(st));
    return r;
  };
  {
    TelemetryWriter w(dir, "heal");
    for (std::uint64_t i = 0; i < kRecords; ++i) {
      lines.push_back(to_line(record(i)));
      w.append(record(i));
    }
    w.flush();
  }
  const auto log_path = stream_path(dir, Stream::steps);
  const auto idx_path = log_path.string() + ".idx";
  const auto full = slurp(log_path);
  const auto full_idx = slurp(idx_path);
  const auto final_start = full.size() - lines.back().size();
  std::size_t escapes = 0, offsets = 0;
  for (auto cut = final_start; cut < full.size(); ++cut, ++offsets) {
    std::ofstream(log_path, std::ios::binary | std::ios::trunc) << full.substr(0, cut);
    std::ofstream(idx_path, std::ios::binary | std::ios::trunc) << full_idx;
    auto log = JsonlLog::open(log_path, true);
    bool intact = log.lines() == kRecords - 1 && slurp(log_path) == full.substr(0, final_start);
    for (std::uint64_t i = 0; intact && i + 1 < kRecords; ++i) {
      auto off = log.find({0, i});
      intact = off && log.read_line_at(*off) + "\n" == lines[i];
    }
    if (!intact) ++escapes;
  }
  return {escapes == 0 && offsets == lines.back().size(),
          std::to_string(offsets) + " truncation offsets, " + std::to_string(escapes) + " corruptions escaped"};
}

Verdict native_conformance() {
  conformance::Options o;
  o.worker = kWorker;
  o.transcript = kSource / "fixtures" / "conformance" / "random_corridor_seed42.json";
  const auto report = conformance::run_suite(o);
  std::size_t passed = 0;
  for (const auto& c : report.checks) passed += c.passed ? 1 : 0;
  return {report.passed(), std::to_string(passed) + "/" + std::to_string(report.checks.size()) + " checks passed" +
                               (report.first_failure() ? ", first failure " + *report.first_failure() : "")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"shared-seed determinism", shared_seed_determinism},
      {"lock-step invariant", lock_step},
      {"heartbeat fault window", heartbeat_window},
      {"matrix exactness", matrix_exactness},
      {"greedy vs random sanity", greedy_vs_random},
      {"phi grammar suite", phi_corpus},
      {"protocol fuzz and round-trip", protocol_fuzz},
      {"telemetry crash safety", telemetry_self_heal},
      {"built-in worker conformance", native_conformance},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.passed) ++failures;
    std::cout << (v.passed ? "PASS" : "FAIL") << "  " << name << ": " << v.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
