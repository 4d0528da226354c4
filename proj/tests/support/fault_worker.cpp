// Worker that misbehaves on request, for supervisor tests.
#include <CLI11.hpp>

#include "mosaic/worker/worker.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fault-injecting worker"};
  mosaic::worker::WorkerOptions options;
  auto& f = options.faults;
  std::string kind = "random";
  std::uint64_t silent = 0, crash = 0;
  app.add_option("--kind", kind);
  app.add_flag("--ignore-stop", f.ignore_stop);
  app.add_flag("--garbage-handshake", f.garbage_handshake);
  app.add_flag("--garbage-output", f.garbage_output);
  app.add_flag("--omit-episode-end", f.omit_episode_end);
  app.add_flag("--no-heartbeat", f.no_heartbeat);
  app.add_flag("--echo-identity", f.echo_identity);
  app.add_flag("--spawn-grandchild", f.spawn_grandchild);
  auto* silent_opt = app.add_option("--silent-at-step", silent);
  auto* crash_opt = app.add_option("--crash-at-step", crash);
  app.add_option("--marker", f.marker_file, "once-only marker for step faults");
  CLI11_PARSE(app, argc, argv);
  if (*silent_opt) f.silent_at_step = silent;
  if (*crash_opt) f.crash_at_step = crash;
  options.kind = mosaic::worker::policy_kind_from_string(kind).value_or(mosaic::worker::PolicyKind::random);
  options.heartbeat_secs = mosaic::worker::heartbeat_secs_from_env();
  return mosaic::worker::run_worker(options);
}
