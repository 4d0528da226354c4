// Built-in worker process: speaks the line protocol on stdin/stdout.
#include <CLI11.hpp>

#include "mosaic/worker/worker.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mosaic built-in worker"};
  std::string kind = "random";
  std::uint32_t max_image_history = 0;
  app.add_option("--kind", kind, "policy: random, noop, cycle, greedy, text")
      ->check(CLI::IsMember({"random", "noop", "cycle", "greedy", "text"}));
  app.add_option("--max-image-history", max_image_history, "frames a VLM-style worker accepts");
  CLI11_PARSE(app, argc, argv);

  mosaic::worker::WorkerOptions options;
  options.kind = *mosaic::worker::policy_kind_from_string(kind);
  options.max_image_history = max_image_history;
  options.heartbeat_secs = mosaic::worker::heartbeat_secs_from_env();
  return mosaic::worker::run_worker(options);
}
