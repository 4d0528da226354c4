#include "mosaic/control/http.hpp"

#include <httplib.h>

#include <charconv>

#include "mosaic/evaluation/run.hpp"
#include "mosaic/operators/config.hpp"
#include "mosaic/operators/handle.hpp"

namespace mosaic::control {

using namespace std::chrono_literals;

namespace {

constexpr const char* kJson = "application/json";
constexpr const char* kNdjson = "application/x-ndjson";

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(canonical_dump(body) + "\n", kJson);
}

void fail(httplib::Response& res, int status, const std::string& kind, const std::string& message,
          Json extra = Json::object()) {
  extra["error"] = kind;
  extra["message"] = message;
  reply(res, status, extra);
}

// Runs a handler and maps the error taxonomy onto status codes.
template <class F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const operators::ConfigError& e) {
    Json issues = Json::array();
    for (const auto& i : e.issues()) issues.push_back(Json{{"path", i.path}, {"message", i.message}});
    fail(res, 400, "validation", e.what(), Json{{"issues", issues}});
  } catch (const ValidationError& e) {
    fail(res, 400, "validation", e.what(),
         Json{{"issues", Json::array({Json{{"path", e.field_path()}, {"message", e.what()}}})}});
  } catch (const NotFoundError& e) {
    fail(res, 404, "not_found", e.what());
  } catch (const BlockedConflict& e) {
    fail(res, 409, "blocked", e.what(), Json{{"waiting", e.waiting()}});
  } catch (const StateError& e) {
    fail(res, 409, "conflict", e.what());
  } catch (const std::exception& e) {
    fail(res, 500, "internal", e.what());
  }
}

std::uint64_t uint_param(const httplib::Request& req, const std::string& name, std::uint64_t fallback) {
  if (!req.has_param(name)) return fallback;
  const auto text = req.get_param_value(name);
  std::uint64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ValidationError(name, "must be a non-negative integer");
  }
  return value;
}

void ndjson(httplib::Response& res, const std::string& body) {
  res.status = 200;
  res.set_content(body, kNdjson);
}

}  // namespace

HttpServer::HttpServer(ControlService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::routes() {
  auto& s = *server_;
  auto& svc = service_;

  s.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, Json{{"ok", true}, {"version", std::string(evaluation::kSoftwareVersion)}});
  });

  s.Get("/v1/envs", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, ControlService::envs());
  });

  // Runs.
  s.Post("/v1/runs", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<std::string> id;
      if (req.has_param("run_id")) id = req.get_param_value("run_id");
      reply(res, 201, svc.create_run(req.body, id));
    });
  });
  s.Get("/v1/runs", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, svc.list_runs()); });
  });
  s.Get(R"(/v1/runs/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, svc.get_run(req.matches[1])); });
  });
  s.Get(R"(/v1/runs/([^/]+)/(steps|episodes))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      ndjson(res, svc.export_run(req.matches[1], *telemetry::stream_from_string(req.matches[2].str())));
    });
  });
  s.Get(R"(/v1/runs/([^/]+)/query)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      telemetry::QueryFilter f;
      if (req.has_param("session")) f.session_id = req.get_param_value("session");
      if (req.has_param("slot")) f.slot = req.get_param_value("slot");
      if (req.has_param("first_episode")) f.first_episode = uint_param(req, "first_episode", 0);
      if (req.has_param("last_episode")) f.last_episode = uint_param(req, "last_episode", 0);
      reply(res, 200, svc.query_run(req.matches[1], f));
    });
  });
  s.Post(R"(/v1/runs/([^/]+)/(start|pause|resume|stop))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, svc.run_control(req.matches[1], req.matches[2])); });
  });
  s.Post(R"(/v1/runs/([^/]+)/([^/]+))", [](const httplib::Request& req, httplib::Response& res) {
    fail(res, 409, "conflict", "runs do not accept " + req.matches[2].str());
  });

  // Sessions.
  s.Post("/v1/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 201, svc.create_session(req.body)); });
  });
  s.Get("/v1/sessions", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, svc.list_sessions()); });
  });
  s.Get(R"(/v1/sessions/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, svc.get_session(req.matches[1])); });
  });
  s.Post(R"(/v1/sessions/([^/]+)/actions)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, svc.submit_action(req.matches[1], req.body)); });
  });
  s.Post(R"(/v1/sessions/([^/]+)/([a-z_]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, svc.session_control(req.matches[1], req.matches[2])); });
  });
  s.Get(R"(/v1/sessions/([^/]+)/frames/(\d+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, svc.frames(req.matches[1], std::stoull(req.matches[2]))); });
  });
  s.Get(R"(/v1/sessions/([^/]+)/replicas/(\d+)/(steps|episodes))",
        [&svc](const httplib::Request& req, httplib::Response& res) {
          guarded(res, [&] {
            ndjson(res, svc.export_session(req.matches[1], std::stoull(req.matches[2]),
                                           *telemetry::stream_from_string(req.matches[3].str())));
          });
        });

  // Event channel for either subject kind.
  auto events = [this, &svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto bus = svc.events(req.matches[2]);
      const auto after = uint_param(req, "after", 0);
      if (req.has_param("follow") && req.get_param_value("follow") != "0") {
        auto cursor = std::make_shared<std::uint64_t>(after);
        res.set_chunked_content_provider(kNdjson, [this, bus, cursor](std::size_t, httplib::DataSink& sink) {
          for (const auto& e : bus->wait(*cursor, 200ms)) {
            const auto line = canonical_dump(e) + "\n";
            if (!sink.write(line.data(), line.size())) return false;
            *cursor = e["seq"].get<std::uint64_t>();
          }
          if ((bus->closed() && *cursor >= bus->last_seq()) || stopping_) sink.done();
          return true;
        });
        return;
      }
      const auto wait_ms = uint_param(req, "wait_ms", 0);
      auto list = wait_ms > 0 ? bus->wait(after, std::chrono::milliseconds(wait_ms)) : bus->since(after);
      std::string body;
      for (const auto& e : list) body += canonical_dump(e) + "\n";
      ndjson(res, body);
    });
  };
  s.Get(R"(/v1/(runs|sessions)/([^/]+)/events)", events);
}

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw MosaicError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpServer::wait() {
  if (thread_.joinable()) thread_.join();
}

void HttpServer::stop() {
  stopping_ = true;
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace mosaic::control
