#include <array>
#include <cctype>

#include "mosaic/env/env.hpp"

namespace mosaic::env {

namespace {

using Rgb = std::array<std::uint8_t, 3>;

constexpr Rgb kEmptyColor{24, 24, 24};
constexpr Rgb kGoalColor{46, 160, 67};

Rgb agent_color(const std::string& team, bool second) {
  if (team == "blue") return second ? Rgb{120, 170, 250} : Rgb{50, 110, 230};
  if (team == "green") return second ? Rgb{130, 220, 150} : Rgb{40, 170, 80};
  return second ? Rgb{240, 150, 150} : Rgb{220, 60, 60};
}

// First letter of the slot; upper case for index 0, lower case otherwise.
char glyph(const std::string& slot) {
  const bool first = slot.size() >= 2 && slot.compare(slot.size() - 2, 2, "_0") == 0;
  auto c = static_cast<unsigned char>(slot.front());
  return static_cast<char>(first ? std::toupper(c) : std::tolower(c));
}

int wrap_delta(int d, int n) {
  int r = ((d % n) + n) % n;
  return r > n / 2 ? r - n : r;
}

std::string steps(int n, std::string_view dir) {
  return std::to_string(n) + (n == 1 ? " step " : " steps ") + std::string(dir);
}

std::string relative(int dx, int dy) {
  std::string vertical = dy < 0 ? steps(-dy, "up") : dy > 0 ? steps(dy, "down") : "";
  std::string horizontal = dx < 0 ? steps(-dx, "left") : dx > 0 ? steps(dx, "right") : "";
  if (!vertical.empty() && !horizontal.empty()) return vertical + " and " + horizontal;
  return vertical.empty() ? horizontal : vertical;
}

Tensor corridor_tensor(const EnvState& s, const std::string& slot) {
  Tensor t{{1, s.width, 2}, std::vector<float>(static_cast<std::size_t>(s.width * 2), 0.0f)};
  t.data[static_cast<std::size_t>(s.agent_positions.at(slot).x * 2)] = 1.0f;
  for (int x = 0; x < s.width; ++x) {
    if (s.grid[static_cast<std::size_t>(x)] == Cell::goal) t.data[static_cast<std::size_t>(x * 2 + 1)] = 1.0f;
  }
  return t;
}

// Egocentric toroidal window the size of the board, centred on the agent.
// Channels: 0 self, 1 teammate, 2 opponent.
Tensor teamtag_tensor(const EnvState& s, const std::string& slot) {
  const int h = s.height, w = s.width;
  Tensor t{{h, w, 3}, std::vector<float>(static_cast<std::size_t>(h * w * 3), 0.0f)};
  const Pos me = s.agent_positions.at(slot);
  const auto& my_team = s.team_of.at(slot);
  auto set = [&](int row, int col, int ch) {
    t.data[static_cast<std::size_t>((row * w + col) * 3 + ch)] = 1.0f;
  };
  set(h / 2, w / 2, 0);
  for (const auto& [other, pos] : s.agent_positions) {
    if (other == slot) continue;
    int dx = wrap_delta(pos.x - me.x, w);
    int dy = wrap_delta(pos.y - me.y, h);
    set(h / 2 + dy, w / 2 + dx, s.team_of.at(other) == my_team ? 1 : 2);
  }
  return t;
}

std::string corridor_text(const EnvState& s, const std::string& slot) {
  const int x = s.agent_positions.at(slot).x;
  std::string text = "You are in a corridor of length " + std::to_string(s.width) + ".";
  const int ahead = (s.width - 1) - x;
  if (ahead == 0) return text + " You are at the goal.";
  return text + " You see the goal " + steps(ahead, "ahead") + ".";
}

std::string teamtag_text(const EnvState& s, const std::string& slot, ObservationMode mode) {
  const auto& info = s.info();
  const auto& my_team = s.team_of.at(slot);
  const auto& other_team = my_team == info.team_a ? info.team_b : info.team_a;
  const Pos me = s.agent_positions.at(slot);
  std::string text = "You are " + slot + " on team " + my_team + ". Score: " + my_team + " " +
                     std::to_string(s.score.at(my_team)) + ", " + other_team + " " +
                     std::to_string(s.score.at(other_team)) + ".";
  auto describe = [&](bool teammates) {
    for (const auto& [other, pos] : s.agent_positions) {
      if (other == slot || (s.team_of.at(other) == my_team) != teammates) continue;
      text += std::string(teammates ? " You see a teammate " : " You see an opponent ") +
              relative(wrap_delta(pos.x - me.x, s.width), wrap_delta(pos.y - me.y, s.height)) + ".";
    }
  };
  describe(false);
  if (mode == ObservationMode::visible_teammates) describe(true);
  return text;
}

std::string text_for(const EnvState& s, const std::string& slot, ObservationMode mode) {
  return s.task_id == kCorridorTask ? corridor_text(s, slot) : teamtag_text(s, slot, mode);
}

}  // namespace

ObservationPayload serialize_obs(const EnvState& state, std::string_view slot_view,
                                 const ObservationOptions& options) {
  const std::string slot(slot_view);
  if (!state.agent_positions.count(slot)) throw ValidationError("slot", "unknown slot " + slot);
  ObservationPayload obs;
  obs.modality = options.modality;
  switch (options.modality) {
    case ObservationModality::tensor:
      obs.tensor = state.task_id == kCorridorTask ? corridor_tensor(state, slot)
                                                  : teamtag_tensor(state, slot);
      break;
    case ObservationModality::text:
      obs.text = text_for(state, slot, options.mode);
      break;
    case ObservationModality::text_image:
      if (options.max_image_history == 0) {
        throw ValidationError("max_image_history", "text_image observations need a positive image history");
      }
      obs.text = text_for(state, slot, options.mode);
      obs.images.push_back(render_rgb(state));
      break;
    case ObservationModality::image:
      obs.images.push_back(render_rgb(state));
      break;
  }
  return obs;
}

std::string render_ascii(const EnvState& s) {
  std::string rows;
  rows.reserve(static_cast<std::size_t>((s.width + 1) * s.height));
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      char c = s.grid[static_cast<std::size_t>(y * s.width + x)] == Cell::goal ? 'G' : '.';
      for (const auto& [slot, pos] : s.agent_positions) {
        if (pos == Pos{x, y}) c = glyph(slot);
      }
      rows.push_back(c);
    }
    rows.push_back('\n');
  }
  return rows;
}

RgbImage render_rgb(const EnvState& s) {
  RgbImage img{s.height * kTileSize, s.width * kTileSize, {}};
  img.pixels.resize(static_cast<std::size_t>(img.height * img.width * 3));
  auto paint = [&](int px, int py, const Rgb& c) {
    auto i = static_cast<std::size_t>((py * img.width + px) * 3);
    img.pixels[i] = c[0];
    img.pixels[i + 1] = c[1];
    img.pixels[i + 2] = c[2];
  };
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const Rgb& bg = s.grid[static_cast<std::size_t>(y * s.width + x)] == Cell::goal ? kGoalColor : kEmptyColor;
      for (int ty = 0; ty < kTileSize; ++ty) {
        for (int tx = 0; tx < kTileSize; ++tx) paint(x * kTileSize + tx, y * kTileSize + ty, bg);
      }
    }
  }
  for (const auto& [slot, pos] : s.agent_positions) {
    const bool second = glyph(slot) != static_cast<char>(std::toupper(static_cast<unsigned char>(slot.front())));
    const Rgb color = agent_color(s.team_of.at(slot), second);
    for (int ty = 3; ty < kTileSize - 3; ++ty) {
      for (int tx = 3; tx < kTileSize - 3; ++tx) {
        paint(pos.x * kTileSize + tx, pos.y * kTileSize + ty, color);
      }
    }
  }
  return img;
}

Bytes render(const EnvState& state, RenderMode mode) {
  if (mode == RenderMode::ascii) {
    auto text = render_ascii(state);
    return Bytes(text.begin(), text.end());
  }
  return render_rgb(state).pixels;
}

}  // namespace mosaic::env
