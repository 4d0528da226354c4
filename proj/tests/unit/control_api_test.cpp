#include <doctest.h>
#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include "mosaic/control/http.hpp"
#include "mosaic/evaluation/run.hpp"
#include "mosaic/operators/config.hpp"

using namespace mosaic;
using namespace mosaic::control;

namespace {

const std::filesystem::path kWorkerBin = std::filesystem::path(MOSAIC_BINARY_DIR) / "tools" / "mosaic_worker";
const std::filesystem::path kConfigs = std::filesystem::path(MOSAIC_SOURCE_DIR) / "configs";

std::filesystem::path fresh_home(const std::string& name) {
  auto dir = std::filesystem::path(MOSAIC_BINARY_DIR) / "test_runs" / "control" / name;
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

std::vector<Json> lines(const std::string& body) {
  std::vector<Json> out;
  std::istringstream in(body);
  for (std::string line; std::getline(in, line);) out.push_back(Json::parse(line));
  return out;
}

// One daemon on an ephemeral loopback port.
struct Daemon {
  explicit Daemon(const std::string& name) : home(fresh_home(name)), service(options(home)), server(service) {
    port = server.start("127.0.0.1", 0);
  }
  static ServiceOptions options(const std::filesystem::path& home) {
    ServiceOptions o;
    o.home = home;
    o.worker_executable = kWorkerBin;
    return o;
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30, 0);
    return c;
  }
  struct Reply {
    int status = 0;
    Json body;
    std::string raw;
  };
  Reply post(const std::string& path, const std::string& body = "{}") const {
    auto r = client().Post(path, body, "application/json");
    REQUIRE(r);
    return {r->status, r->get_header_value("Content-Type") == "application/json" ? Json::parse(r->body) : Json(),
            r->body};
  }
  Reply get(const std::string& path) const {
    auto r = client().Get(path);
    REQUIRE(r);
    return {r->status, r->get_header_value("Content-Type") == "application/json" ? Json::parse(r->body) : Json(),
            r->body};
  }
  // Waits for the subject's closed event and returns every event.
  std::vector<Json> events_until_closed(const std::string& kind, const std::string& id) const {
    std::vector<Json> all;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(120);
    while (std::chrono::steady_clock::now() < deadline) {
      auto r = get("/v1/" + kind + "/" + id + "/events?after=" + std::to_string(all.size()) + "&wait_ms=500");
      REQUIRE(r.status == 200);
      for (auto& e : lines(r.raw)) all.push_back(e);
      if (!all.empty() && all.back()["kind"] == "closed") return all;
    }
    FAIL("no closed event; last: " << (all.empty() ? std::string("none") : all.back().dump()));
    return all;
  }

  std::filesystem::path home;
  ControlService service;
  HttpServer server;
  int port = 0;
};

std::string random_config(std::uint64_t episodes) {
  operators::RunConfig c;
  c.operator_id = "api";
  c.task = std::string(env::kTeamTagTask);
  c.episodes = episodes;
  for (const auto* slot : {"blue_0", "blue_1", "green_0", "green_1"}) {
    operators::WorkerAssignment a;
    a.agent_slot = slot;
    a.worker_type = operators::Paradigm::baseline;
    a.settings = Json{{"kind", "random"}};
    c.player_workers[slot] = a;
  }
  return c.canonical();
}

Json corridor_op(const std::string& type, Json settings = Json::object()) {
  return Json{{"task", std::string(env::kCorridorTask)},
              {"player_workers", {{"agent_0", {{"worker_type", type}, {"settings", settings}}}}}};
}

std::string session_body(const std::string& id, Json operators, std::uint64_t seed = 42) {
  return canonical_dump(
      Json{{"session_id", id}, {"task", std::string(env::kCorridorTask)}, {"seed", seed}, {"operators", operators}});
}

void check_gapless(const std::vector<Json>& events) {
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i]["seq"] == i + 1);
}

}  // namespace

TEST_CASE("health and unknown subjects") {
  Daemon d("health");
  auto h = d.get("/v1/health");
  CHECK(h.status == 200);
  CHECK(h.body["ok"] == true);
  CHECK(d.get("/v1/runs/nope").status == 404);
  CHECK(d.get("/v1/sessions/nope").status == 404);
  CHECK(d.get("/v1/sessions/nope/frames/0").status == 404);
  CHECK(d.get("/v1/runs/nope/events").status == 404);
  CHECK(d.post("/v1/runs/nope/start").status == 404);
  CHECK(d.get("/v1/runs").body["runs"].empty());
}

TEST_CASE("env manifest maps keys to labelled actions") {
  Daemon d("envs");
  auto r = d.get("/v1/envs");
  REQUIRE(r.status == 200);
  std::map<std::string, Json> by_task;
  for (const auto& e : r.body["envs"]) by_task[e["task"].get<std::string>()] = e;
  REQUIRE(by_task.count(std::string(env::kTeamTagTask)));
  const auto& tag = by_task[std::string(env::kTeamTagTask)];
  CHECK(tag["keymap"]["ArrowUp"] == "up");
  CHECK(tag["slots"].size() == 4);
  for (const auto& [code, label] : tag["keymap"].items()) {
    const auto& actions = tag["actions"];
    CHECK(std::find(actions.begin(), actions.end(), label) != actions.end());
  }
  CHECK(by_task[std::string(env::kCorridorTask)]["keymap"]["Space"] == "stay");
}

TEST_CASE("run creation validates the config document") {
  Daemon d("create");
  auto ok = d.post("/v1/runs", slurp(kConfigs / "heterogeneous_team.json"));
  CHECK(ok.status == 201);
  CHECK(ok.body["status"] == "created");
  CHECK(ok.body["run_id"].get<std::string>().rfind("heterogeneous_team-s0-", 0) == 0);
  CHECK(d.get("/v1/runs/" + ok.body["run_id"].get<std::string>()).body["status"] == "created");
  CHECK(d.post("/v1/runs", slurp(kConfigs / "heterogeneous_team.json")).status == 409);

  std::string dup = slurp(kConfigs / "heterogeneous_team.json");
  dup.insert(dup.find("\"blue_1\""), "\"blue_0\": {\"worker_type\": \"rl\"},\n    ");
  auto bad = d.post("/v1/runs", dup);
  CHECK(bad.status == 400);
  CHECK(bad.body["error"] == "validation");
  CHECK(bad.body["issues"][0]["path"].get<std::string>().find("blue_0") != std::string::npos);

  auto doc = Json::parse(slurp(kConfigs / "heterogeneous_team.json"));
  doc["task"] = "mosaic/Nowhere-v0";
  auto unknown = d.post("/v1/runs", doc.dump());
  CHECK(unknown.status == 400);
  CHECK(unknown.body["issues"][0]["path"] == "task");

  CHECK(d.post("/v1/runs", "{not json").status == 400);
  doc = Json::parse(slurp(kConfigs / "heterogeneous_team.json"));
  doc["player_workers"]["blue_1"]["worker_type"] = "human";
  auto human = d.post("/v1/runs", doc.dump());
  CHECK(human.status == 400);
  CHECK(human.body["issues"][0]["path"] == "player_workers.blue_1.worker_type");
}

TEST_CASE("a run goes through its lifecycle and streams gapless events") {
  Daemon d("lifecycle");
  const std::string id = d.post("/v1/runs?run_id=life", random_config(3)).body["run_id"];
  CHECK(id == "life");
  CHECK(d.post("/v1/runs/life/pause").status == 409);
  CHECK(d.post("/v1/runs/life/step").status == 409);
  CHECK(d.post("/v1/runs/life/start").body["status"] == "running");
  CHECK(d.post("/v1/runs/life/start").status == 409);
  auto events = d.events_until_closed("runs", "life");
  check_gapless(events);
  CHECK(events.front()["kind"] == "state");
  CHECK(events.front()["session_id"] == "life");
  CHECK(std::count_if(events.begin(), events.end(), [](const Json& e) { return e["kind"] == "episode"; }) == 3);
  CHECK(std::count_if(events.begin(), events.end(), [](const Json& e) { return e["kind"] == "step"; }) > 3);
  CHECK(events.back()["data"]["status"] == "finished");

  auto run = d.service.wait_run("life", std::chrono::seconds(10));
  CHECK(run["status"] == "finished");
  CHECK(run["manifest"]["status"] == "finished");
  auto steps = d.get("/v1/runs/life/steps");
  CHECK(steps.raw == slurp(d.home / "runs" / "life" / "steps.jsonl"));
  CHECK(lines(d.get("/v1/runs/life/episodes").raw).size() == 3);
  auto q = d.get("/v1/runs/life/query?slot=blue_0");
  CHECK(q.body["episodes"] == 3);
  CHECK(d.get("/v1/runs/life/query?first_episode=x").status == 400);
  CHECK(d.post("/v1/runs/life/resume").status == 409);
  CHECK(d.post("/v1/runs/life/stop").status == 409);
  CHECK(d.get("/v1/runs").body["runs"][0]["run_id"] == "life");

  auto replay = d.get("/v1/runs/life/events?after=5");
  CHECK(lines(replay.raw).front()["seq"] == 6);
  CHECK(lines(replay.raw).size() == events.size() - 5);
}

TEST_CASE("pausing a run through the API leaves its stream unchanged") {
  Daemon d("pause");
  d.post("/v1/runs?run_id=p", random_config(4));
  d.post("/v1/runs/p/start");
  CHECK(d.post("/v1/runs/p/pause").body["status"] == "paused");
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  CHECK(d.post("/v1/runs/p/pause").status == 409);
  CHECK(d.post("/v1/runs/p/resume").body["status"] == "running");
  d.events_until_closed("runs", "p");

  evaluation::RunOptions o;
  o.home = fresh_home("pause_reference");
  o.run_id = "p";
  o.worker_executable = kWorkerBin;
  auto reference = evaluation::run_script(operators::RunConfig::parse(random_config(4)), o);
  REQUIRE(reference.ok());
  CHECK(slurp(reference.run_dir / "steps.jsonl") == slurp(d.home / "runs" / "p" / "steps.jsonl"));
}

TEST_CASE("stop ends a run early and a created run can be stopped") {
  Daemon d("stop");
  d.post("/v1/runs?run_id=long", random_config(500));
  d.post("/v1/runs/long/start");
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  CHECK(d.post("/v1/runs/long/stop").body["status"] == "stopping");
  auto events = d.events_until_closed("runs", "long");
  CHECK(events.back()["data"]["status"] == "stopped");
  CHECK(events.back()["data"]["episodes"].get<int>() < 500);

  d.post("/v1/runs?run_id=idle", random_config(1));
  CHECK(d.post("/v1/runs/idle/stop").body["status"] == "stopped");
  CHECK(d.post("/v1/runs/idle/start").status == 409);
}

TEST_CASE("conflicting concurrent verbs: exactly one wins") {
  Daemon d("race");
  d.post("/v1/runs?run_id=r", random_config(200));
  d.post("/v1/runs/r/start");
  for (int round = 0; round < 5; ++round) {
    int codes[2] = {0, 0};
    std::thread a([&] { codes[0] = d.post("/v1/runs/r/pause").status; });
    std::thread b([&] { codes[1] = d.post("/v1/runs/r/pause").status; });
    a.join();
    b.join();
    CHECK(std::min(codes[0], codes[1]) == 200);
    CHECK(std::max(codes[0], codes[1]) == 409);
    CHECK(d.post("/v1/runs/r/resume").status == 200);
  }
  d.post("/v1/runs/r/stop");
  d.events_until_closed("runs", "r");
}

TEST_CASE("manual session endpoints") {
  Daemon d("session");
  Json ops = Json::array({corridor_op("rl", {{"algorithm", "greedy"}}), corridor_op("llm"),
                          corridor_op("baseline", {{"kind", "random"}})});
  auto created = d.post("/v1/sessions", session_body("s1", ops));
  REQUIRE(created.status == 201);
  CHECK(created.body["replicas"] == 3);
  CHECK(d.post("/v1/sessions", session_body("s1", ops)).status == 409);
  CHECK(d.post("/v1/sessions/s1/step").status == 409);
  CHECK(d.post("/v1/sessions/s1/start").body["status"] == "running");

  auto f0 = d.get("/v1/sessions/s1/frames/0");
  REQUIRE(f0.status == 200);
  REQUIRE(f0.body["frames"].size() == 3);
  for (int i = 1; i < 3; ++i) {
    CHECK(f0.body["frames"][i]["ascii"] == f0.body["frames"][0]["ascii"]);
    CHECK(f0.body["frames"][i]["rgb"]["digest"] == f0.body["frames"][0]["rgb"]["digest"]);
  }
  CHECK(f0.body["frames"][0]["badges"][0]["color"] == "purple");
  CHECK(d.get("/v1/sessions/s1/frames/1").status == 404);

  for (int b = 1; b <= 3; ++b) {
    auto step = d.post("/v1/sessions/s1/step");
    REQUIRE(step.status == 200);
    CHECK(step.body["barrier"] == b);
    CHECK(step.body["records"] == 3);
  }
  auto info = d.get("/v1/sessions/s1").body;
  CHECK(info["replica_steps"] == Json::array({3, 3, 3}));

  auto first = lines(d.get("/v1/sessions/s1/events").raw);
  auto second = lines(d.get("/v1/sessions/s1/events").raw);
  CHECK(first == second);
  check_gapless(first);
  std::vector<Json> steps;
  for (const auto& e : first) {
    if (e["kind"] == "step") steps.push_back(e);
  }
  REQUIRE(steps.size() == 3);
  for (const auto& e : steps) CHECK(e["data"]["records"].size() == 3);
  auto resumed = lines(d.get("/v1/sessions/s1/events?after=5").raw);
  CHECK(resumed.front()["seq"] == 6);

  CHECK(d.post("/v1/sessions/s1/pause").status == 200);
  CHECK(d.post("/v1/sessions/s1/step").status == 409);
  CHECK(d.post("/v1/sessions/s1/resume").status == 200);
  CHECK(d.post("/v1/sessions/s1/jump").status == 400);
  CHECK(lines(d.get("/v1/sessions/s1/replicas/2/steps").raw).size() == 3);
  CHECK(d.get("/v1/sessions/s1/replicas/7/steps").status == 404);
  CHECK(d.post("/v1/sessions/s1/stop").body["status"] == "finished");
  CHECK(d.post("/v1/sessions/s1/stop").status == 409);
  auto tail = d.events_until_closed("sessions", "s1");
  check_gapless(tail);
}

TEST_CASE("session creation reports field paths") {
  Daemon d("session_validation");
  CHECK(d.post("/v1/sessions", session_body("e", Json::array())).status == 400);
  auto bad = d.post("/v1/sessions", session_body("e", Json::array({corridor_op("llm"), corridor_op("alien")})));
  CHECK(bad.status == 400);
  CHECK(bad.body["issues"][0]["path"].get<std::string>().rfind("operators[1]", 0) == 0);
  auto seed = d.post("/v1/sessions", canonical_dump(Json{{"task", std::string(env::kCorridorTask)},
                                                         {"seed", -1},
                                                         {"operators", Json::array({corridor_op("llm")})}}));
  CHECK(seed.status == 400);
  CHECK(seed.body["issues"][0]["path"] == "seed");
  CHECK(d.post("/v1/sessions", "{\"task\": \"x\", \"task\": \"y\"}").status == 400);
}

TEST_CASE("human actions use a latest-wins mailbox") {
  Daemon d("human");
  Json ops = Json::array({corridor_op("human"), corridor_op("baseline", {{"kind", "noop"}})});
  d.post("/v1/sessions", session_body("h", ops, 1));
  CHECK(d.post("/v1/sessions/h/actions", R"({"replica": 0, "slot": "agent_0", "action": 1})").status == 409);
  d.post("/v1/sessions/h/start");

  auto blocked = d.post("/v1/sessions/h/step");
  CHECK(blocked.status == 409);
  CHECK(blocked.body["error"] == "blocked");
  CHECK(blocked.body["waiting"] == Json::parse(R"([{"replica": 0, "slots": ["agent_0"]}])"));
  CHECK(d.get("/v1/sessions/h").body["replica_steps"] == Json::array({0, 0}));

  CHECK(d.post("/v1/sessions/h/actions", R"({"replica": 1, "slot": "agent_0", "action": 1})").status == 400);
  CHECK(d.post("/v1/sessions/h/actions", R"({"replica": 0, "slot": "agent_0", "action": 3})").status == 400);
  CHECK(d.post("/v1/sessions/h/actions", R"({"replica": 0, "slot": "agent_9", "action": 1})").status == 404);
  auto a1 = d.post("/v1/sessions/h/actions", R"({"replica": 0, "slot": "agent_0", "action": 1})");
  CHECK(a1.status == 200);
  CHECK(a1.body["replaced"] == false);
  auto a2 = d.post("/v1/sessions/h/actions", R"({"replica": 0, "slot": "agent_0", "action": 2})");
  CHECK(a2.body["replaced"] == true);
  CHECK(d.post("/v1/sessions/h/step").status == 200);
  auto recs = lines(d.get("/v1/sessions/h/replicas/0/steps").raw);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0]["action"] == 2);
  CHECK(recs[0]["paradigm"] == "Human");
  CHECK(d.post("/v1/sessions/h/step").status == 409);  // consumed exactly once
}

TEST_CASE("a follow subscriber sees the whole stream and is released at close") {
  Daemon d("follow");
  d.post("/v1/runs?run_id=f", random_config(2));
  std::string streamed;
  std::thread sub([&] {
    auto c = d.client();
    c.Get("/v1/runs/f/events?follow=1", [&](const char* data, std::size_t n) {
      streamed.append(data, n);
      return true;
    });
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  d.post("/v1/runs/f/start");
  sub.join();
  auto got = lines(streamed);
  check_gapless(got);
  REQUIRE_FALSE(got.empty());
  CHECK(got.back()["kind"] == "closed");
  CHECK(got == lines(d.get("/v1/runs/f/events").raw));
}
