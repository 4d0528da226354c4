#include "mosaic/evaluation/run.hpp"

#include <chrono>

#include "mosaic/evaluation/stepper.hpp"
#include "mosaic/operators/handle.hpp"

namespace mosaic::evaluation {

void RunControl::pause() {
  std::lock_guard lock(mu_);
  paused_ = true;
}

void RunControl::resume() {
  {
    std::lock_guard lock(mu_);
    paused_ = false;
  }
  cv_.notify_all();
}

void RunControl::stop() {
  {
    std::lock_guard lock(mu_);
    stopped_ = true;
  }
  cv_.notify_all();
}

bool RunControl::paused() const {
  std::lock_guard lock(mu_);
  return paused_;
}

bool RunControl::stopped() const {
  std::lock_guard lock(mu_);
  return stopped_;
}

bool RunControl::checkpoint() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !paused_ || stopped_; });
  return !stopped_;
}

Json RunResult::to_json() const {
  Json returns = Json::object();
  for (const auto& [team, r] : team_returns) returns[team] = r.to_double();
  Json j{{"run_id", run_id},
         {"status", status},
         {"episodes", episodes},
         {"team_returns", returns},
         {"wins", wins},
         {"draws", draws},
         {"truncated_episodes", truncated_episodes},
         {"wall_seconds", wall_seconds}};
  j["last_completed_episode"] = last_completed_episode ? Json(*last_completed_episode) : Json(nullptr);
  if (error) j["error"] = *error;
  return j;
}

std::string default_run_id(const operators::RunConfig& config) {
  const std::string base = config.operator_id.empty() ? "run" : config.operator_id;
  return base + "-s" + std::to_string(config.seed) + "-" + config.digest().substr(0, 10);
}

namespace {

Json worker_manifests(const operators::OperatorHandle& handle, supervisor::Supervisor& sup) {
  Json out = Json::array();
  for (const auto& slot : handle.slots()) {
    Json w{{"slot", slot}, {"paradigm", to_string(handle.paradigm(slot))}};
    if (auto id = handle.worker_id(slot)) {
      const auto info = sup.info(*id);
      Json commands = Json::array();
      for (auto c : info.session.commands) commands.push_back(protocol::to_string(c));
      Json modalities = Json::array();
      for (auto m : info.session.modalities) modalities.push_back(protocol::to_string(m));
      w["worker_id"] = *id;
      w["worker_kind"] = protocol::to_string(info.session.worker_kind);
      w["commands"] = commands;
      w["observation_modalities"] = modalities;
      w["max_image_history"] = info.session.max_image_history;
      w["schema_version"] = info.session.schema_version.str();
    }
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

RunResult run_script(const operators::RunConfig& config, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  for (const auto& [slot, a] : config.player_workers) {
    if (a.worker_type == operators::Paradigm::human) {
      throw ValidationError("player_workers." + slot, "human slots need a manual session");
    }
  }
  if (config.episodes == 0) throw ValidationError("episodes", "must be positive");

  telemetry::RunRegistry registry(options.home);
  RunResult result;
  result.run_id = options.run_id.value_or(default_run_id(config));
  result.run_dir = registry.run_dir(result.run_id);
  if (std::filesystem::exists(result.run_dir)) {
    if (!options.overwrite) throw StateError("run " + result.run_id + " already exists");
    std::filesystem::remove_all(result.run_dir);
  }
  std::filesystem::create_directories(result.run_dir);
  const std::string config_bytes = config.canonical() + "\n";
  telemetry::write_atomic(result.run_dir / "config.json", config_bytes);

  telemetry::RunManifest manifest;
  manifest.run_id = result.run_id;
  manifest.operator_id = config.operator_id;
  manifest.config_digest = config.digest();
  manifest.seed = config.seed;
  manifest.episodes = config.episodes;
  manifest.created_at = telemetry::utc_now();
  manifest.software_version = std::string(kSoftwareVersion);
  telemetry::write_manifest(result.run_dir, manifest);

  auto emit = [&](const std::string& kind, Json data) {
    if (options.on_event) options.on_event(kind, data);
  };
  emit("state", Json{{"run_id", result.run_id}, {"status", "running"}});

  supervisor::SupervisorOptions sup_options;
  sup_options.run_dir = result.run_dir;
  sup_options.clock = options.clock;
  sup_options.on_event = [&](const supervisor::LivenessEvent& e) {
    emit("liveness", Json{{"worker_id", e.worker_id},
                          {"kind", supervisor::to_string(e.kind)},
                          {"silence_ms", std::chrono::duration_cast<std::chrono::milliseconds>(e.silence).count()},
                          {"detail", e.detail}});
  };
  supervisor::Supervisor sup(sup_options);
  telemetry::TelemetryWriter writer(result.run_dir, result.run_id);

  try {
    operators::BindOptions bind;
    bind.worker_executable = options.worker_executable;
    bind.recover = options.recover;
    auto handle = operators::OperatorHandle::bind(config, sup, bind);
    manifest.workers = worker_manifests(*handle, sup);
    telemetry::write_manifest(result.run_dir, manifest);
    supervisor::MonitorThread monitor(sup, std::chrono::milliseconds(250));

    const auto& info = config.task_info();
    std::optional<std::uint64_t> budget;
    if (config.max_steps && *config.max_steps < static_cast<std::uint64_t>(info.horizon)) budget = config.max_steps;

    bool stopped = false;
    for (std::uint64_t ep = 0; ep < config.episodes && !stopped; ++ep) {
      StepContext ctx{result.run_id, std::string(telemetry::kMainSession), ep, budget};
      env::EnvState state = env::make_env(config.task, derive_seed(config.seed, kEnvSeedStream, ep), ep);
      handle->begin_episode(config.seed, ep);
      std::vector<telemetry::StepRecord> records;
      for (;;) {
        if (options.control && !options.control->checkpoint()) {
          stopped = true;
          break;
        }
        auto step = advance(*handle, state, ctx);
        Json appended = Json::array();
        for (const auto& r : step.records) {
          writer.append(r);
          records.push_back(r);
          if (options.on_event) appended.push_back(r.to_json());
        }
        if (options.on_event) emit("step", Json{{"episode_index", ep}, {"records", std::move(appended)}});
        state = std::move(step.state);
        if (step.episode_over) break;
      }
      if (stopped) break;
      auto episode = summarize_episode(ctx, state, handle->slots(), records);
      writer.append(episode);
      writer.flush(true);
      for (const auto& [slot, total] : episode.totals) result.team_returns[state.team_of.at(slot)] += total;
      if (episode.winner == "draw") {
        ++result.draws;
      } else {
        ++result.wins[episode.winner];
      }
      if (state.truncated) ++result.truncated_episodes;
      ++result.episodes;
      result.last_completed_episode = ep;
      emit("episode", episode.to_json());
    }
    if (stopped) result.status = "stopped";
    handle->close();
  } catch (const std::exception& e) {
    result.status = "failed";
    result.error = e.what();
  }
  writer.flush(true);
  sup.shutdown();

  if (result.status != "failed") {
    try {
      telemetry::reconcile(result.run_dir);
    } catch (const telemetry::ReconciliationError& e) {
      result.status = "failed";
      result.error = e.what();
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  manifest.status = result.status;
  manifest.finished_at = telemetry::utc_now();
  manifest.error = result.error;
  telemetry::write_manifest(result.run_dir, manifest);
  telemetry::write_atomic(result.run_dir / "result", canonical_dump(result.to_json()) + "\n");
  emit("state", Json{{"run_id", result.run_id}, {"status", result.status}});
  emit("closed", result.to_json());
  return result;
}

}  // namespace mosaic::evaluation
