#include <doctest.h>

#include "mosaic/conformance/conformance.hpp"

using namespace mosaic;
using namespace mosaic::conformance;

namespace {

const std::filesystem::path kBin = MOSAIC_BINARY_DIR;
const std::filesystem::path kTranscript =
    std::filesystem::path(MOSAIC_SOURCE_DIR) / "fixtures" / "conformance" / "random_corridor_seed42.json";

Options native(std::vector<std::string> args = {}) {
  Options o;
  o.worker = kBin / "tools" / "mosaic_worker";
  o.args = std::move(args);
  return o;
}

Options faulty(std::vector<std::string> args) {
  Options o;
  o.worker = kBin / "tests" / "fault_worker";
  o.args = std::move(args);
  return o;
}

const Check& check(const Report& r, const std::string& name) {
  for (const auto& c : r.checks) {
    if (c.name == name) return c;
  }
  FAIL("no check named " << name);
  throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("built-in random worker passes the suite and the golden transcript") {
  auto o = native({"--kind", "random"});
  o.transcript = kTranscript;
  auto r = run_suite(o);
  for (const auto& c : r.checks) {
    CAPTURE(c.name);
    CAPTURE(c.detail);
    CHECK(c.passed);
  }
  CHECK(r.passed());
  CHECK(r.checks.size() == 10);
  CHECK(r.to_json()["first_failure"].is_null());
}

TEST_CASE("every built-in policy passes the mandatory checks") {
  for (const char* kind : {"noop", "cycle", "greedy", "text"}) {
    CAPTURE(kind);
    auto r = run_suite(native({"--kind", kind}));
    CHECK(r.passed());
    CHECK_FALSE(check(r, "transcript").mandatory);
  }
}

TEST_CASE("a non-random policy does not match the random transcript") {
  auto o = native({"--kind", "cycle"});
  o.transcript = kTranscript;
  auto r = run_suite(o);
  CHECK_FALSE(r.passed());
  CHECK(r.first_failure() == "transcript");
  CHECK(check(r, "transcript").detail.find("expected") != std::string::npos);
}

TEST_CASE("omitting episode_end fails the named check") {
  auto r = run_suite(faulty({"--omit-episode-end"}));
  CHECK_FALSE(r.passed());
  CHECK(r.first_failure() == "episode_end");
  CHECK(check(r, "determinism").detail.rfind("skipped", 0) == 0);
  CHECK(check(r, "stop").passed);
}

TEST_CASE("a silent worker fails heartbeat timing") {
  auto r = run_suite(faulty({"--no-heartbeat"}));
  CHECK(r.first_failure() == "heartbeat_timing");
}

TEST_CASE("a worker ignoring stop fails the stop check") {
  auto r = run_suite(faulty({"--ignore-stop"}));
  CHECK(r.first_failure() == "stop");
}

TEST_CASE("garbage handshakes and missing executables fail first") {
  CHECK(run_suite(faulty({"--garbage-handshake"})).first_failure() == "handshake");
  Options missing;
  missing.worker = "/nonexistent/worker";
  auto r = run_suite(missing);
  CHECK(r.first_failure() == "handshake");
  for (const auto& c : r.checks) {
    if (c.name != "handshake" && c.mandatory) CHECK(c.detail.rfind("skipped", 0) == 0);
  }
}
