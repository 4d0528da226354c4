#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "mosaic/evaluation/matrix.hpp"
#include "mosaic/evaluation/run.hpp"
#include "mosaic/evaluation/session.hpp"
#include "mosaic/operators/handle.hpp"

using namespace mosaic;
using namespace mosaic::evaluation;
using operators::Paradigm;
using operators::RunConfig;

namespace {

const std::filesystem::path kWorkerBin = std::filesystem::path(MOSAIC_BINARY_DIR) / "tools" / "mosaic_worker";
const std::filesystem::path kFaultBin = std::filesystem::path(MOSAIC_BINARY_DIR) / "tests" / "fault_worker";
const std::filesystem::path kConfigs = std::filesystem::path(MOSAIC_SOURCE_DIR) / "configs";

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::path(MOSAIC_BINARY_DIR) / "test_runs" / "evaluation" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<Json> lines_of(const std::filesystem::path& p) {
  std::vector<Json> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) out.push_back(Json::parse(line));
  return out;
}

RunOptions run_options(const std::filesystem::path& home) {
  RunOptions o;
  o.home = home;
  o.worker_executable = kWorkerBin;
  return o;
}

RunConfig corridor(Paradigm p, Json settings = Json::object(), std::uint64_t episodes = 2) {
  RunConfig c;
  c.operator_id = "corridor";
  c.task = std::string(env::kCorridorTask);
  c.seed = 3;
  c.episodes = episodes;
  operators::WorkerAssignment a;
  a.agent_slot = "agent_0";
  a.worker_type = p;
  a.settings = std::move(settings);
  c.player_workers["agent_0"] = a;
  return RunConfig::from_json(c.to_json());
}

RunConfig teamtag(std::map<std::string, std::pair<Paradigm, Json>> slots, std::uint64_t episodes = 1) {
  RunConfig c;
  c.operator_id = "tt";
  c.task = std::string(env::kTeamTagTask);
  c.episodes = episodes;
  for (auto& [slot, spec] : slots) {
    operators::WorkerAssignment a;
    a.agent_slot = slot;
    a.worker_type = spec.first;
    a.settings = spec.second;
    c.player_workers[slot] = a;
  }
  return c;
}

RunConfig all_random(std::uint64_t episodes = 1) {
  const Json random{{"kind", "random"}};
  return teamtag({{"blue_0", {Paradigm::baseline, random}},
                  {"blue_1", {Paradigm::baseline, random}},
                  {"green_0", {Paradigm::baseline, random}},
                  {"green_1", {Paradigm::baseline, random}}},
                 episodes);
}

supervisor::SupervisorOptions sup_options(const std::filesystem::path& dir) {
  supervisor::SupervisorOptions o;
  o.run_dir = dir;
  return o;
}

operators::BindOptions bind_options(std::string prefix = "") {
  operators::BindOptions b;
  b.worker_executable = kWorkerBin;
  b.name_prefix = std::move(prefix);
  return b;
}

std::map<std::string, ObservationPayload> observe_all(operators::OperatorHandle& h, const env::EnvState& s) {
  std::map<std::string, ObservationPayload> out;
  for (const auto& slot : h.slots()) out.emplace(slot, h.observe(s, slot));
  return out;
}

SessionOptions session_options(const std::filesystem::path& dir, std::string id) {
  SessionOptions o;
  o.session_id = std::move(id);
  o.run_id = "manual";
  o.run_dir = dir;
  o.worker_executable = kWorkerBin;
  return o;
}

std::vector<RunConfig> three_corridor_operators() {
  return {corridor(Paradigm::rl, Json{{"algorithm", "greedy"}}), corridor(Paradigm::llm),
          corridor(Paradigm::baseline, Json{{"kind", "random"}})};
}

// Session stream with the session id blanked.
std::string stream_without_session(const std::filesystem::path& dir, const std::string& replica_session) {
  std::string out;
  for (auto doc : lines_of(dir / "sessions" / replica_session / "steps.jsonl")) {
    doc.erase("session_id");
    out += canonical_dump(doc) + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("binding spawns one worker per slot") {
  auto dir = fresh_dir("bind");
  supervisor::Supervisor sup(sup_options(dir));
  auto config = RunConfig::load(kConfigs / "heterogeneous_team.json");
  auto h = operators::OperatorHandle::bind(config, sup, bind_options());
  CHECK(h->slots() == std::vector<std::string>{"blue_0", "blue_1", "green_0", "green_1"});
  CHECK(sup.worker_ids().size() == 4);
  for (const auto& slot : h->slots()) {
    REQUIRE(h->worker_id(slot));
    CHECK(sup.info(*h->worker_id(slot)).state == supervisor::WorkerState::ready);
  }
  CHECK(h->paradigm("green_1") == Paradigm::llm);
  CHECK(sup.info(*h->worker_id("green_1")).session.worker_kind == protocol::WorkerKind::llm);

  SUBCASE("missing slot is named") {
    auto partial = config;
    partial.player_workers.erase("blue_1");
    CHECK_THROWS_WITH_AS(operators::OperatorHandle::bind(partial, sup, bind_options("p.")), doctest::Contains("blue_1"),
                         ValidationError);
  }
  SUBCASE("unknown slot is named") {
    auto extra = config;
    extra.player_workers["red_0"] = extra.player_workers["blue_1"];
    CHECK_THROWS_WITH_AS(operators::OperatorHandle::bind(extra, sup, bind_options("q.")), doctest::Contains("red_0"),
                         ValidationError);
  }
  SUBCASE("spawn failure propagates and leaves nothing behind") {
    auto broken = config;
    broken.player_workers["green_0"].settings["executable"] = "/nonexistent/worker";
    const auto before = sup.worker_ids().size();
    CHECK_THROWS_AS(operators::OperatorHandle::bind(broken, sup, bind_options("x.")), supervisor::SpawnError);
    for (const auto& id : sup.worker_ids()) {
      if (id.rfind("x.", 0) == 0) CHECK(sup.info(id).state == supervisor::WorkerState::dead);
    }
    CHECK(sup.worker_ids().size() >= before);
  }
}

TEST_CASE("single-agent corridor binds one worker in either stepping mode") {
  auto dir = fresh_dir("corridor_modes");
  for (auto mode : {operators::StepMode::parallel, operators::StepMode::aec}) {
    auto c = corridor(Paradigm::baseline, Json{{"kind", "cycle"}}, 1);
    c.mode = mode;
    c.operator_id = mode == operators::StepMode::aec ? "aec" : "par";
    auto result = run_script(c, run_options(dir));
    CHECK(result.ok());
    CHECK(result.episodes == 1);
  }
}

TEST_CASE("noop baseline always answers the null action") {
  auto dir = fresh_dir("noop");
  supervisor::Supervisor sup(sup_options(dir));
  auto h = operators::OperatorHandle::bind(corridor(Paradigm::baseline, Json{{"kind", "noop"}}), sup, bind_options());
  h->begin_episode(9, 0);
  auto s = env::make_env(env::kCorridorTask, 1);
  for (std::uint64_t i = 0; i < 10; ++i) {
    auto d = h->select_action("agent_0", h->observe(s, "agent_0"), Json{{"step_index", i}});
    CHECK(d.action == env::task_info(env::kCorridorTask).null_action);
    CHECK_FALSE(d.raw_text);
  }
}

TEST_CASE("parallel selection equals sequential selection") {
  auto dir = fresh_dir("parallel_vs_sequential");
  supervisor::Supervisor sup(sup_options(dir));
  auto config = RunConfig::load(kConfigs / "heterogeneous_team.json");
  auto joint = operators::OperatorHandle::bind(config, sup, bind_options("j."));
  auto single = operators::OperatorHandle::bind(config, sup, bind_options("s."));
  joint->begin_episode(11, 0);
  single->begin_episode(11, 0);
  auto state = env::make_env(env::kTeamTagTask, 5);
  for (std::uint64_t t = 0; t < 40 && !state.done(); ++t) {
    const Json info{{"step_index", t}};
    auto a = joint->select_actions(observe_all(*joint, state), info);
    std::map<std::string, int> actions;
    for (const auto& slot : single->slots()) {
      auto d = single->select_action(slot, single->observe(state, slot), info);
      CHECK(d.action == a.at(slot).action);
      CHECK(d.raw_text == a.at(slot).raw_text);
      actions[slot] = d.action;
    }
    CHECK(a.at("green_1").raw_text);
    CHECK(a.at("green_1").parse_outcome == operators::ParseOutcome::parsed);
    state = env::step_parallel(state, actions).state;
  }
}

TEST_CASE("a failing slot fails the whole joint action") {
  auto dir = fresh_dir("joint_failure");
  supervisor::Supervisor sup(sup_options(dir));
  auto h = operators::OperatorHandle::bind(all_random(), sup, bind_options());
  h->begin_episode(0, 0);
  auto state = env::make_env(env::kTeamTagTask, 0);
  CHECK(h->select_actions(observe_all(*h, state)).size() == 4);
  sup.kill_for_test(*h->worker_id("green_0"));
  try {
    h->select_actions(observe_all(*h, state));
    FAIL("expected a joint failure");
  } catch (const operators::JointActionError& e) {
    REQUIRE(e.failures().size() == 1);
    CHECK(e.failures().count("green_0") == 1);
    CHECK(std::string(e.what()).find("green_0") != std::string::npos);
  }
}

TEST_CASE("frozen slots refuse training") {
  auto dir = fresh_dir("frozen");
  supervisor::Supervisor sup(sup_options(dir));
  auto c = corridor(Paradigm::rl, Json{{"algorithm", "greedy"}});
  c.player_workers["agent_0"].frozen = true;
  auto h = operators::OperatorHandle::bind(c, sup, bind_options("f."));
  CHECK_THROWS_AS(h->train("agent_0"), StateError);
  auto thawed = corridor(Paradigm::rl, Json{{"algorithm", "greedy"}});
  auto h2 = operators::OperatorHandle::bind(thawed, sup, bind_options("t."));
  h2->begin_episode(0, 0);
  CHECK_THROWS_WITH(h2->train("agent_0"), doctest::Contains("does not support train"));
}

TEST_CASE("multimodal slots see a bounded image history") {
  auto dir = fresh_dir("images");
  supervisor::Supervisor sup(sup_options(dir));
  auto h = operators::OperatorHandle::bind(corridor(Paradigm::vlm, Json{{"max_image_history", 2}}), sup,
                                           bind_options());
  h->begin_episode(1, 0);
  auto s = env::make_env(env::kCorridorTask, 1);
  std::vector<RgbImage> seen;
  for (std::uint64_t t = 0; t < 4; ++t) {
    auto obs = h->observe(s, "agent_0");
    CHECK(obs.modality == ObservationModality::text_image);
    CHECK_FALSE(obs.invariant_violation());
    CHECK(obs.images.size() == std::min<std::size_t>(t + 1, 2));
    seen.push_back(obs.images.back());
    if (obs.images.size() == 2) CHECK(obs.images.front() == seen[seen.size() - 2]);
    auto d = h->select_action("agent_0", obs, Json{{"step_index", t}});
    CHECK(d.raw_text);
    s = env::step_parallel(s, {{"agent_0", d.action}}).state;
  }
  h->begin_episode(1, 1);
  CHECK(h->observe(s, "agent_0").images.size() == 1);
}

TEST_CASE("every paradigm honours the same slot contract") {
  auto home = fresh_dir("uniformity");
  const std::vector<std::pair<Paradigm, Json>> variants{
      {Paradigm::rl, Json{{"algorithm", "greedy"}}},
      {Paradigm::llm, Json{{"grammar", "labeled_keyword"}}},
      {Paradigm::vlm, Json{{"max_image_history", 3}}},
      {Paradigm::baseline, Json{{"kind", "random"}}},
      {Paradigm::baseline, Json{{"kind", "cycle"}}},
  };
  const int k = env::task_info(env::kCorridorTask).num_actions();
  int n = 0;
  for (const auto& [p, settings] : variants) {
    CAPTURE(to_string(p));
    auto c = corridor(p, settings, 3);
    c.operator_id = "u" + std::to_string(n++);
    auto result = run_script(c, run_options(home));
    REQUIRE(result.ok());
    CHECK(result.episodes == 3);
    for (const auto& rec : lines_of(result.run_dir / "steps.jsonl")) {
      CHECK(rec["paradigm"] == to_string(p));
      CHECK(rec["action"].get<int>() >= 0);
      CHECK(rec["action"].get<int>() < k);
      CHECK(rec.contains("raw_text") == (p == Paradigm::llm || p == Paradigm::vlm));
    }
    CHECK_NOTHROW(telemetry::reconcile(result.run_dir));
  }
}

TEST_CASE("script runs account for their budget and reproduce") {
  auto a = fresh_dir("script_a");
  auto b = fresh_dir("script_b");
  auto config = all_random(10);
  auto r1 = run_script(config, run_options(a));
  REQUIRE(r1.ok());
  CHECK(r1.episodes == 10);
  auto episodes = lines_of(r1.run_dir / "episodes.jsonl");
  REQUIRE(episodes.size() == 10);
  std::uint64_t wins = 0;
  for (const auto& e : episodes) {
    CHECK(e["episode_length"].get<int>() <= env::task_info(env::kTeamTagTask).horizon);
    if (e["winner"] != "draw") ++wins;
  }
  CHECK(wins + r1.draws == 10);

  auto r2 = run_script(config, run_options(b));
  REQUIRE(r2.ok());
  CHECK(r1.run_id == r2.run_id);
  CHECK(slurp(r1.run_dir / "steps.jsonl") == slurp(r2.run_dir / "steps.jsonl"));
  CHECK(slurp(r1.run_dir / "episodes.jsonl") == slurp(r2.run_dir / "episodes.jsonl"));
  CHECK_FALSE(slurp(r1.run_dir / "steps.jsonl").empty());

  CHECK_THROWS_AS(run_script(config, run_options(a)), StateError);
  auto again = run_options(a);
  again.overwrite = true;
  CHECK(run_script(config, again).ok());
  CHECK(slurp(r1.run_dir / "steps.jsonl") == slurp(r2.run_dir / "steps.jsonl"));

  auto manifest = telemetry::read_manifest(r1.run_dir);
  CHECK(manifest.status == "finished");
  CHECK(manifest.config_digest == config.digest());
  CHECK(manifest.workers.size() == 4);
  CHECK(manifest.config_digest == sha256_hex(slurp(r1.run_dir / "config.json").substr(
                                      0, slurp(r1.run_dir / "config.json").size() - 1)));
  auto result = Json::parse(slurp(r1.run_dir / "result"));
  CHECK(result["episodes"] == 10);
  CHECK(result["status"] == "finished");
}

TEST_CASE("max_steps truncates episodes") {
  auto home = fresh_dir("truncate");
  auto config = all_random(2);
  config.max_steps = 7;
  auto r = run_script(config, run_options(home));
  REQUIRE(r.ok());
  for (const auto& e : lines_of(r.run_dir / "episodes.jsonl")) CHECK(e["episode_length"].get<int>() <= 7);
  auto steps = lines_of(r.run_dir / "steps.jsonl");
  CHECK(steps.back()["truncated"].get<bool>() != steps.back()["terminated"].get<bool>());
}

TEST_CASE("a worker crash mid-run is recovered without changing the stream") {
  auto clean_home = fresh_dir("crash_clean");
  auto crash_home = fresh_dir("crash_faulty");
  auto config = all_random(3);
  config.checkpoint_every = 8;
  auto faulty = config;
  faulty.player_workers["blue_1"].settings =
      Json{{"kind", "random"},
           {"executable", kFaultBin.string()},
           {"args", {"--kind", "random", "--crash-at-step", "19", "--marker", (crash_home / "marker").string()}}};
  auto options = run_options(clean_home);
  options.run_id = "same";
  auto clean = run_script(config, options);
  options.home = crash_home;
  std::vector<std::string> liveness;
  options.on_event = [&](const std::string& kind, const Json& data) {
    if (kind == "liveness") liveness.push_back(data["kind"].get<std::string>());
  };
  auto crashed = run_script(faulty, options);
  REQUIRE(clean.ok());
  REQUIRE(crashed.ok());
  CHECK(std::filesystem::exists(crash_home / "marker"));
  CHECK(std::find(liveness.begin(), liveness.end(), "recovered") != liveness.end());
  CHECK(slurp(clean.run_dir / "steps.jsonl") == slurp(crashed.run_dir / "steps.jsonl"));
}

TEST_CASE("pausing a script does not change its stream") {
  auto plain = fresh_dir("pause_plain");
  auto paused = fresh_dir("pause_paused");
  auto config = all_random(3);
  auto r1 = run_script(config, run_options(plain));

  RunControl control;
  control.pause();
  auto options = run_options(paused);
  options.control = &control;
  std::thread resumer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    control.resume();
    control.pause();
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    control.resume();
  });
  auto r2 = run_script(config, options);
  resumer.join();
  REQUIRE(r2.ok());
  CHECK(slurp(r1.run_dir / "steps.jsonl") == slurp(r2.run_dir / "steps.jsonl"));

  RunControl stopper;
  stopper.stop();
  auto stopped_options = run_options(fresh_dir("pause_stopped"));
  stopped_options.control = &stopper;
  auto r3 = run_script(config, stopped_options);
  CHECK(r3.status == "stopped");
  CHECK(r3.episodes == 0);
}

TEST_CASE("human slots cannot run unattended") {
  auto c = corridor(Paradigm::human, Json::object(), 1);
  CHECK_THROWS_AS(run_script(c, run_options(fresh_dir("human_script"))), ValidationError);
}

TEST_CASE("manual sessions start from identical replicas") {
  auto dir = fresh_dir("session_open");
  auto s = ManualSession::open(three_corridor_operators(), std::string(env::kCorridorTask), 42,
                               session_options(dir, "open"));
  REQUIRE(s->replica_count() == 3);
  auto frames = s->frames(0);
  REQUIRE(frames.size() == 3);
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(env::encode_state(s->state(i)) == env::encode_state(s->state(0)));
    CHECK(frames[i].ascii == frames[0].ascii);
    CHECK(frames[i].rgb == frames[0].rgb);
  }
  CHECK(s->badges(0).at(0).color == "purple");
  CHECK(s->badges(1).at(0).color == "blue");
  CHECK(s->badges(2).at(0).color == "gray");
  CHECK_THROWS_AS(s->frames(1), NotFoundError);
  CHECK_THROWS_AS(ManualSession::open({}, std::string(env::kCorridorTask), 42, session_options(dir, "none")),
                  ValidationError);
}

TEST_CASE("manual session barriers keep replicas in lock-step") {
  auto dir = fresh_dir("session_lockstep");
  std::vector<std::string> kinds;
  auto options = session_options(dir, "lock");
  options.on_event = [&](const std::string& kind, const Json&) { kinds.push_back(kind); };
  auto s = ManualSession::open(three_corridor_operators(), std::string(env::kCorridorTask), 42, options);
  for (int b = 1; b <= 60; ++b) {
    auto out = s->step();
    REQUIRE(out.advanced);
    CHECK(out.records.size() == 3);
    auto steps = s->replica_steps();
    CHECK(std::set<std::uint64_t>(steps.begin(), steps.end()).size() == 1);
    CHECK(steps[0] == static_cast<std::uint64_t>(b));
    CHECK(s->barrier() == static_cast<std::uint64_t>(b));
  }
  CHECK(s->episode_index(2) >= 2);  // horizon 20 forces auto-resets
  CHECK(std::count(kinds.begin(), kinds.end(), "step") == 60);
  CHECK(std::count(kinds.begin(), kinds.end(), "episode") >= 3);

  s->pause();
  CHECK_THROWS_AS(s->step(), StateError);
  CHECK_THROWS_AS(s->pause(), StateError);
  s->resume();
  CHECK(s->step().advanced);
  s->stop();
  CHECK(s->status() == SessionStatus::finished);
  CHECK_THROWS_AS(s->step(), StateError);
  for (std::size_t i = 0; i < 3; ++i) CHECK_NOTHROW(telemetry::reconcile(dir, s->replica_session_id(i)));
}

TEST_CASE("identical manual sessions produce identical streams") {
  auto dir_a = fresh_dir("session_twin_a");
  auto dir_b = fresh_dir("session_twin_b");
  {
    auto a = ManualSession::open(three_corridor_operators(), std::string(env::kCorridorTask), 42,
                                 session_options(dir_a, "twin-a"));
    auto b = ManualSession::open(three_corridor_operators(), std::string(env::kCorridorTask), 42,
                                 session_options(dir_b, "twin-b"));
    for (int i = 0; i < 50; ++i) {
      a->step();
      b->step();
    }
  }
  for (int r = 0; r < 3; ++r) {
    const auto sa = stream_without_session(dir_a, "twin-a.r" + std::to_string(r));
    const auto sb = stream_without_session(dir_b, "twin-b.r" + std::to_string(r));
    CHECK_FALSE(sa.empty());
    CHECK(sa == sb);
  }
}

TEST_CASE("divergent replicas render different frames") {
  auto dir = fresh_dir("session_diverge");
  std::vector<RunConfig> ops{corridor(Paradigm::human), corridor(Paradigm::human)};
  auto s = ManualSession::open(ops, std::string(env::kCorridorTask), 7, session_options(dir, "div"));
  const auto& labels = env::task_info(env::kCorridorTask).action_labels;
  const int forward = static_cast<int>(std::find(labels.begin(), labels.end(), "forward") - labels.begin());
  const int back = static_cast<int>(std::find(labels.begin(), labels.end(), "back") - labels.begin());
  REQUIRE(forward < static_cast<int>(labels.size()));
  REQUIRE(back < static_cast<int>(labels.size()));
  s->mailbox(0, "agent_0").submit(forward, 0);
  s->mailbox(1, "agent_0").submit(back, 0);
  REQUIRE(s->step().advanced);
  auto frames = s->frames(1);
  CHECK(frames[0].ascii != frames[1].ascii);
}

TEST_CASE("human slots block the barrier until input arrives") {
  auto dir = fresh_dir("session_human");
  std::vector<RunConfig> ops{corridor(Paradigm::human), corridor(Paradigm::baseline, Json{{"kind", "noop"}})};
  auto s = ManualSession::open(ops, std::string(env::kCorridorTask), 1, session_options(dir, "human"));
  auto blocked = s->step();
  CHECK_FALSE(blocked.advanced);
  REQUIRE(blocked.blocked.count(0) == 1);
  CHECK(blocked.blocked.at(0) == std::vector<std::string>{"agent_0"});
  CHECK(s->replica_steps() == std::vector<std::uint64_t>{0, 0});

  auto& box = s->mailbox(0, "agent_0");
  CHECK_FALSE(box.submit(1, 0).replaced);
  CHECK(box.submit(2, 0).replaced);
  auto out = s->step();
  REQUIRE(out.advanced);
  CHECK(out.records[0].at(0).action == 2);
  CHECK(out.records[0].at(0).paradigm == "Human");
  CHECK_FALSE(box.peek());
  CHECK_FALSE(s->step().advanced);  // consumed exactly once
  CHECK_THROWS_AS(s->mailbox(1, "agent_0"), ValidationError);
  CHECK_THROWS_AS(s->mailbox(5, "agent_0"), NotFoundError);
}

TEST_CASE("a worker death fails the barrier atomically") {
  auto dir = fresh_dir("session_kill");
  std::vector<RunConfig> ops{corridor(Paradigm::baseline, Json{{"kind", "random"}}),
                             corridor(Paradigm::baseline, Json{{"kind", "random"}}),
                             corridor(Paradigm::baseline, Json{{"kind", "noop"}})};
  ops[2].player_workers["agent_0"].settings = Json{{"kind", "random"},
                                                   {"executable", kFaultBin.string()},
                                                   {"args", {"--kind", "random", "--crash-at-step", "4"}}};
  auto s = ManualSession::open(ops, std::string(env::kCorridorTask), 5, session_options(dir, "kill"));
  for (int i = 0; i < 3; ++i) REQUIRE(s->step().advanced);
  CHECK_THROWS(s->step());
  CHECK(s->status() == SessionStatus::failed);
  CHECK(s->replica_steps() == std::vector<std::uint64_t>{3, 3, 3});
  CHECK(s->barrier() == 3);
  CHECK_FALSE(s->failure().empty());
  CHECK_THROWS_AS(s->step(), StateError);
}

TEST_CASE("matrix rows match the paradigm tables") {
  MatrixSpec adv;
  auto a = build_matrix(adv);
  REQUIRE(a.size() == 7);
  using Comp = std::map<std::string, std::vector<std::string>>;
  const std::vector<Comp> adversarial{
      {{"green", {"RL", "RL"}}, {"blue", {"RL", "RL"}}},   {{"green", {"LLM", "LLM"}}, {"blue", {"LLM", "LLM"}}},
      {{"green", {"VLM", "VLM"}}, {"blue", {"VLM", "VLM"}}}, {{"green", {"RL", "RL"}}, {"blue", {"LLM", "LLM"}}},
      {{"green", {"RL", "RL"}}, {"blue", {"VLM", "VLM"}}},   {{"green", {"LLM", "LLM"}}, {"blue", {"VLM", "VLM"}}},
      {{"green", {"RL", "RL"}}, {"blue", {"rho", "rho"}}},
  };
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(a[i].id == "A" + std::to_string(i + 1));
    CHECK(team_composition(a[i].config) == adversarial[i]);
  }

  MatrixSpec coop;
  coop.family = Family::cooperative;
  auto c = build_matrix(coop);
  REQUIRE(c.size() == 8);
  const std::vector<Comp> cooperative{
      {{"green", {"LLM", "RL"}}, {"blue", {"RL", "rho"}}}, {{"green", {"LLM", "RL"}}, {"blue", {"RL", "nu"}}},
      {{"green", {"RL", "VLM"}}, {"blue", {"RL", "rho"}}}, {{"green", {"RL", "VLM"}}, {"blue", {"RL", "nu"}}},
      {{"green", {"RL", "RL"}}, {"blue", {"RL", "RL"}}},   {{"green", {"LLM", "RL"}}, {"blue", {"RL", "RL"}}},
      {{"green", {"RL", "VLM"}}, {"blue", {"RL", "RL"}}},  {{"green", {"LLM", "RL"}}, {"blue", {"RL", "VLM"}}},
  };
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(c[i].id == "C" + std::to_string(i + 1));
    CHECK(team_composition(c[i].config) == cooperative[i]);
    for (const auto& [slot, w] : c[i].config.player_workers) {
      if (w.worker_type == Paradigm::rl) CHECK(w.frozen);
    }
  }
  CHECK(c[5].config.player_workers.at("blue_0").settings["training"] == "co_trained");

  auto out = fresh_dir("matrix_out");
  auto paths = write_matrix(out, c);
  REQUIRE(paths.size() == 8);
  CHECK(RunConfig::load(paths[1]).to_json() == c[1].config.to_json());
}

TEST_CASE("infeasible pools name the blocked rows") {
  MatrixSpec coop;
  coop.family = Family::cooperative;
  coop.pools[Paradigm::llm] = 0;
  try {
    build_matrix(coop);
    FAIL("expected infeasibility");
  } catch (const InfeasibleMatrix& e) {
    CHECK(e.rows() == std::vector<std::string>{"C1", "C2", "C6", "C8"});
  }
  MatrixSpec adv;
  adv.pools[Paradigm::rl] = 2;
  try {
    build_matrix(adv);
    FAIL("expected infeasibility");
  } catch (const InfeasibleMatrix& e) {
    CHECK(e.rows() == std::vector<std::string>{"A1"});
  }
}
