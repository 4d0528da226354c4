#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "mosaic/control/service.hpp"

namespace httplib {
class Server;
}

namespace mosaic::control {

/// HTTP front of a ControlService; routes are listed in docs/api.md.
class HttpServer {
 public:
  explicit HttpServer(ControlService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws MosaicError when binding fails.
  int start(const std::string& host, int port);
  /// Blocks until stop() is called from elsewhere.
  void wait();
  void stop();

 private:
  void routes();

  ControlService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
};

}  // namespace mosaic::control
