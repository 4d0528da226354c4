#include "mosaic/evaluation/replay.hpp"

#include <fstream>

#include "mosaic/operators/config.hpp"
#include "mosaic/telemetry/store.hpp"

namespace mosaic::evaluation {

Json Replay::to_json(env::RenderMode mode) const {
  Json eps = Json::array();
  for (const auto& e : episodes) eps.push_back(Json{{"episode_index", e.episode_index}, {"frames", e.frames}});
  return Json{{"run_id", run_id}, {"mode", mode == env::RenderMode::ascii ? "ascii" : "rgb"}, {"episodes", eps}};
}

namespace {

std::string frame_of(const env::EnvState& s, env::RenderMode mode) {
  if (mode == env::RenderMode::ascii) return env::render_ascii(s);
  return sha256_hex(std::span<const std::uint8_t>(env::render(s, mode)));
}

void expect_match(const Json& rec, const env::Transition& t) {
  const auto recorded = Reward::from_double(rec.at("reward").get<double>());
  if (recorded != t.reward || rec.at("terminated").get<bool>() != t.terminated) {
    throw ReplayDivergence("episode " + rec.at("episode_index").dump() + " step " + rec.at("step_index").dump() +
                           " slot " + rec.at("slot").get<std::string>() + " does not reproduce its record");
  }
}

}  // namespace

Replay replay_run(const std::filesystem::path& run_dir, env::RenderMode mode) {
  const auto config_path = run_dir / "config.json";
  if (!std::filesystem::exists(config_path) ||
      !std::filesystem::exists(telemetry::stream_path(run_dir, telemetry::Stream::steps))) {
    throw NotFoundError("no finalized run at " + run_dir.string());
  }
  const auto config = operators::RunConfig::load(config_path);
  Replay out;
  out.run_id = run_dir.filename().string();

  std::ifstream in(telemetry::stream_path(run_dir, telemetry::Stream::steps), std::ios::binary);
  std::vector<Json> records;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) records.push_back(Json::parse(line));
  }

  std::size_t i = 0;
  while (i < records.size()) {
    const auto ep = records[i].at("episode_index").get<std::uint64_t>();
    out.run_id = records[i].value("run_id", out.run_id);
    ReplayEpisode episode{ep, {}};
    env::EnvState state = env::make_env(config.task, derive_seed(config.seed, kEnvSeedStream, ep), ep);
    while (i < records.size() && records[i].at("episode_index").get<std::uint64_t>() == ep) {
      if (config.mode == operators::StepMode::parallel) {
        const auto step = records[i].at("step_index").get<std::uint64_t>();
        std::map<std::string, int> actions;
        std::vector<const Json*> group;
        for (; i < records.size() && records[i].at("episode_index").get<std::uint64_t>() == ep &&
               records[i].at("step_index").get<std::uint64_t>() == step;
             ++i) {
          actions[records[i].at("slot").get<std::string>()] = records[i].at("action").get<int>();
          group.push_back(&records[i]);
        }
        auto result = env::step_parallel(state, actions);
        for (const auto* rec : group) {
          for (const auto& t : result.transitions) {
            if (t.slot == rec->at("slot").get<std::string>()) expect_match(*rec, t);
          }
        }
        state = std::move(result.state);
      } else {
        const auto& rec = records[i++];
        auto result = env::step_aec(state, rec.at("slot").get<std::string>(), rec.at("action").get<int>());
        expect_match(rec, result.transition);
        state = std::move(result.state);
      }
      episode.frames.push_back(frame_of(state, mode));
    }
    out.episodes.push_back(std::move(episode));
  }
  return out;
}

}  // namespace mosaic::evaluation
