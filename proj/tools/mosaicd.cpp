// Control daemon: serves the HTTP API until SIGINT or SIGTERM.
#include <CLI11.hpp>
#include <csignal>
#include <iostream>

#include "mosaic/control/http.hpp"
#include "mosaic/operators/handle.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mosaic control daemon"};
  std::string bind = "127.0.0.1";
  int port = mosaic::control::kDefaultPort;
  std::string home, worker;
  app.add_option("--bind", bind, "listen address");
  app.add_option("--port", port, "listen port, 0 for any")->check(CLI::Range(0, 65535));
  app.add_option("--home", home, "directory holding runs/ and sessions/");
  app.add_option("--worker", worker, "worker executable");
  CLI11_PARSE(app, argc, argv);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  mosaic::control::ServiceOptions options;
  if (!home.empty()) options.home = home;
  options.worker_executable = worker.empty() ? mosaic::operators::sibling_executable("mosaic_worker") : std::filesystem::path(worker);
  mosaic::control::ControlService service(options);
  mosaic::control::HttpServer server(service);
  try {
    port = server.start(bind, port);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  std::cout << "{\"listening\":\"" << bind << ":" << port << "\"}" << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down\n";
  server.stop();
  service.shutdown();
  return 0;
}
