#include "mosaic/cli/cli.hpp"

#include <httplib.h>

#include <CLI11.hpp>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "mosaic/conformance/conformance.hpp"
#include "mosaic/control/service.hpp"
#include "mosaic/evaluation/matrix.hpp"
#include "mosaic/evaluation/replay.hpp"
#include "mosaic/evaluation/run.hpp"
#include "mosaic/operators/handle.hpp"

namespace mosaic::cli {

namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

struct Unreachable : MosaicError {
  using MosaicError::MosaicError;
};

void emit(std::ostream& out, const Json& doc) { out << doc.dump(2) << "\n"; }

Json issues_json(const std::vector<operators::ConfigIssue>& issues) {
  Json arr = Json::array();
  for (const auto& i : issues) arr.push_back(Json{{"path", i.path}, {"message", i.message}});
  return arr;
}

std::pair<std::string, int> split_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) return {text, control::kDefaultPort};
  return {text.substr(0, colon), std::stoi(text.substr(colon + 1))};
}

}  // namespace

fs::path resolve_config(const std::string& name_or_path) {
  if (fs::is_regular_file(name_or_path)) return name_or_path;
  std::vector<fs::path> dirs;
  if (const char* env = std::getenv("MOSAIC_CONFIG_DIR"); env && *env) dirs.emplace_back(env);
  dirs.emplace_back("configs");
  const auto self = operators::sibling_executable("mosaic");
  if (self.has_parent_path()) dirs.push_back(self.parent_path().parent_path() / "configs");
#ifdef MOSAIC_DEFAULT_CONFIG_DIR
  dirs.emplace_back(MOSAIC_DEFAULT_CONFIG_DIR);
#endif
  for (const auto& d : dirs) {
    for (const auto& candidate : {d / name_or_path, d / (name_or_path + ".json")}) {
      if (fs::is_regular_file(candidate)) return candidate;
    }
  }
  throw NotFoundError("no config named " + name_or_path);
}

namespace {

int cmd_validate(const std::string& name, std::ostream& out) {
  const auto path = resolve_config(name);
  std::ifstream f(path, std::ios::binary);
  std::stringstream text;
  text << f.rdbuf();
  try {
    auto config = operators::RunConfig::parse(text.str());
    emit(out, Json{{"valid", true},
                   {"path", path.string()},
                   {"operator_id", config.operator_id},
                   {"config_digest", config.digest()}});
    return kExitOk;
  } catch (const operators::ConfigError& e) {
    emit(out, Json{{"valid", false}, {"path", path.string()}, {"issues", issues_json(e.issues())}});
    return kExitFailure;
  } catch (const ValidationError& e) {
    emit(out, Json{{"valid", false},
                   {"path", path.string()},
                   {"issues", Json::array({Json{{"path", e.field_path()}, {"message", e.what()}}})}});
    return kExitFailure;
  }
}

struct RunArgs {
  std::string config;
  std::optional<std::int64_t> seed;
  std::optional<std::uint64_t> episodes;
  std::optional<std::string> run_id;
  std::optional<std::string> home;
  std::optional<std::string> daemon;
  std::optional<std::string> worker;
  bool overwrite = false;
};

Json remote_json(httplib::Client& client, const std::string& method, const std::string& path,
                 const std::string& body = "") {
  auto res = method == "GET" ? client.Get(path) : client.Post(path, body, "application/json");
  if (!res) throw Unreachable("daemon unreachable: " + httplib::to_string(res.error()));
  auto doc = Json::parse(res->body, nullptr, false);
  if (res->status >= 400) {
    const auto message = doc.is_object() ? doc.value("message", res->body) : res->body;
    if (res->status == 404) throw NotFoundError(message);
    if (res->status == 400) throw ValidationError("config", message);
    throw StateError(message);
  }
  return doc;
}

int run_remote(const RunArgs& a, const operators::RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto [host, port] = split_endpoint(*a.daemon);
  httplib::Client client(host, port);
  client.set_connection_timeout(2s);
  client.set_read_timeout(30s);
  std::string path = "/v1/runs";
  if (a.run_id) path += "?run_id=" + *a.run_id;
  const auto created = remote_json(client, "POST", path, config.canonical());
  const auto id = created.at("run_id").get<std::string>();
  err << "run " << id << " submitted to " << host << ":" << port << "\n";
  remote_json(client, "POST", "/v1/runs/" + id + "/start");
  for (;;) {
    auto state = remote_json(client, "GET", "/v1/runs/" + id);
    const auto status = state.value("status", "");
    if (status != "running" && status != "paused" && status != "stopping" && status != "created") {
      Json doc = state.contains("result") ? state["result"] : state;
      emit(out, doc);
      return status == "finished" ? kExitOk : kExitFailure;
    }
    std::this_thread::sleep_for(100ms);
  }
}

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  if (a.seed && *a.seed < 0) throw CLI::ValidationError("--seed", "must be non-negative");
  auto config = operators::RunConfig::load(resolve_config(a.config));
  if (a.seed) config.seed = static_cast<std::uint64_t>(*a.seed);
  if (a.episodes) config.episodes = *a.episodes;
  config = operators::RunConfig::from_json(config.to_json());
  if (a.daemon) return run_remote(a, config, out, err);

  evaluation::RunOptions options;
  if (a.home) options.home = *a.home;
  options.run_id = a.run_id;
  options.overwrite = a.overwrite;
  if (a.worker) options.worker_executable = *a.worker;
  else options.worker_executable = operators::sibling_executable("mosaic_worker");
  auto result = evaluation::run_script(config, options);
  err << "run " << result.run_id << " " << result.status << " after " << result.episodes << " episodes\n";
  emit(out, result.to_json());
  return result.ok() ? kExitOk : kExitFailure;
}

std::map<operators::Paradigm, std::size_t> parse_pools(const std::string& text,
                                                       std::map<operators::Paradigm, std::size_t> pools) {
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--pool", "expected paradigm=count, got " + item);
    auto p = operators::paradigm_from_string(item.substr(0, eq));
    if (!p || *p == operators::Paradigm::baseline) {
      throw CLI::ValidationError("--pool", "unknown paradigm " + item.substr(0, eq));
    }
    std::size_t count = 0;
    const auto value = item.substr(eq + 1);
    auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), count);
    if (ec != std::errc() || end != value.data() + value.size()) {
      throw CLI::ValidationError("--pool", "bad count in " + item);
    }
    pools[*p] = count;
  }
  return pools;
}

int cmd_matrix(const std::string& family, const std::string& dir, std::uint64_t seed, std::uint64_t episodes,
               const std::string& pool, std::ostream& out) {
  std::vector<evaluation::Family> families;
  if (family == "both") families = {evaluation::Family::adversarial, evaluation::Family::cooperative};
  else families = {*evaluation::family_from_string(family)};
  std::vector<evaluation::MatrixEntry> all;
  std::vector<std::string> infeasible;
  for (auto f : families) {
    evaluation::MatrixSpec spec;
    spec.family = f;
    spec.seed = seed;
    spec.episodes = episodes;
    if (!pool.empty()) spec.pools = parse_pools(pool, spec.pools);
    try {
      auto rows = evaluation::build_matrix(spec);
      all.insert(all.end(), rows.begin(), rows.end());
    } catch (const evaluation::InfeasibleMatrix& e) {
      infeasible.insert(infeasible.end(), e.rows().begin(), e.rows().end());
    }
  }
  if (!infeasible.empty()) {
    emit(out, Json{{"ok", false}, {"infeasible", infeasible}});
    return kExitFailure;
  }
  const auto paths = evaluation::write_matrix(dir, all);
  Json rows = Json::array();
  for (std::size_t i = 0; i < all.size(); ++i) {
    rows.push_back(Json{{"id", all[i].id},
                        {"purpose", all[i].purpose},
                        {"path", paths[i].string()},
                        {"teams", evaluation::team_composition(all[i].config)}});
  }
  emit(out, Json{{"ok", true}, {"configs", rows}});
  return kExitOk;
}

int cmd_replay(const std::string& run, const std::optional<std::string>& home, const std::string& mode,
               std::ostream& out) {
  fs::path dir = run;
  if (!fs::is_directory(dir)) {
    const fs::path root = home ? fs::path(*home) : telemetry::RunRegistry::default_home();
    dir = telemetry::RunRegistry(root).run_dir(run);
  }
  const auto m = mode == "rgb" ? env::RenderMode::rgb : env::RenderMode::ascii;
  emit(out, evaluation::replay_run(dir, m).to_json(m));
  return kExitOk;
}

int cmd_conformance(conformance::Options options, std::ostream& out, std::ostream& err) {
  auto report = conformance::run_suite(options);
  for (const auto& c : report.checks) {
    err << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
  }
  emit(out, report.to_json());
  return report.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mosaic evaluation platform"};
  app.require_subcommand(1);

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "check a run config");
  validate->add_option("--config", validate_config, "config name or path")->required();

  RunArgs ra;
  auto* run = app.add_subcommand("run", "execute a script-mode run");
  run->add_option("--config", ra.config, "config name or path")->required();
  run->add_option("--seed", ra.seed, "base seed (overrides the config)");
  run->add_option("--episodes", ra.episodes, "episode count (overrides the config)");
  run->add_option("--run-id", ra.run_id, "explicit run id");
  run->add_option("--home", ra.home, "directory holding runs/");
  run->add_option("--worker", ra.worker, "worker executable");
  auto* local = run->add_flag("--local", "run in-process (default)");
  run->add_option("--daemon", ra.daemon, "submit to a daemon at host:port")->excludes(local);
  run->add_flag("--overwrite", ra.overwrite, "replace an existing run directory");

  std::string family = "both", matrix_out = "matrix", pool;
  std::uint64_t matrix_seed = 0, matrix_episodes = 100;
  auto* matrix = app.add_subcommand("matrix", "write the evaluation matrix configs");
  matrix->add_option("--family", family)->check(CLI::IsMember({"adversarial", "cooperative", "both"}));
  matrix->add_option("--out", matrix_out, "output directory");
  matrix->add_option("--seed", matrix_seed);
  matrix->add_option("--episodes", matrix_episodes);
  matrix->add_option("--pool", pool, "agent pools, e.g. rl=4,llm=2,vlm=0,human=0");

  std::string replay_run_arg, replay_mode = "ascii";
  std::optional<std::string> replay_home;
  auto* replay = app.add_subcommand("replay", "re-render a finished run");
  replay->add_option("--run", replay_run_arg, "run id or directory")->required();
  replay->add_option("--home", replay_home, "directory holding runs/");
  replay->add_option("--mode", replay_mode)->check(CLI::IsMember({"ascii", "rgb"}));

  conformance::Options co;
  std::string co_worker;
  std::optional<std::string> co_transcript;
  std::vector<std::string> co_args;
  auto* conf = app.add_subcommand("conformance", "run the worker conformance suite");
  conf->add_option("--worker", co_worker, "worker executable")->required();
  conf->add_option("--transcript", co_transcript, "expected corridor transcript");
  conf->add_option("--scale", co.clock_scale, "heartbeat clock scale")->check(CLI::PositiveNumber);
  conf->add_option("args", co_args, "worker arguments (after --)");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    err << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    err << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(validate_config, out);
    if (*run) return cmd_run(ra, out, err);
    if (*matrix) return cmd_matrix(family, matrix_out, matrix_seed, matrix_episodes, pool, out);
    if (*replay) return cmd_replay(replay_run_arg, replay_home, replay_mode, out);
    if (*conf) {
      co.worker = co_worker;
      co.args = co_args;
      if (co_transcript) co.transcript = fs::path(*co_transcript);
      return cmd_conformance(co, out, err);
    }
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Unreachable& e) {
    err << e.what() << "\n";
    emit(out, Json{{"error", "unreachable"}, {"message", e.what()}});
    return kExitUnreachable;
  } catch (const NotFoundError& e) {
    err << e.what() << "\n";
    emit(out, Json{{"error", "not_found"}, {"message", e.what()}});
    return kExitNotFound;
  } catch (const operators::ConfigError& e) {
    err << e.what() << "\n";
    emit(out, Json{{"error", "validation"}, {"message", e.what()}, {"issues", issues_json(e.issues())}});
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    emit(out, Json{{"error", "failed"}, {"message", e.what()}});
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace mosaic::cli
