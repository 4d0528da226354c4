#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mosaic/env/env.hpp"

namespace mosaic::evaluation {

struct ReplayEpisode {
  std::uint64_t episode_index = 0;
  /// One frame after every recorded step: ascii text, or the sha256 of the
  /// packed pixels in rgb mode.
  std::vector<std::string> frames;
};

struct Replay {
  std::string run_id;
  std::vector<ReplayEpisode> episodes;
  Json to_json(env::RenderMode mode) const;
};

/// The recorded actions no longer reproduce the recorded outcomes.
class ReplayDivergence : public MosaicError {
 public:
  using MosaicError::MosaicError;
};

/// Re-simulates a finalized run from its config.json and steps.jsonl.
/// Throws NotFoundError when the directory is not a run and
/// ReplayDivergence when a recorded reward or terminal flag differs.
Replay replay_run(const std::filesystem::path& run_dir, env::RenderMode mode);

}  // namespace mosaic::evaluation
