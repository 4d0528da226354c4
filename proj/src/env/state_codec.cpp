#include <cstring>

#include "mosaic/env/env.hpp"

// Layout (little-endian), see docs/state_encoding.md:
//   "MSTE" u16:version str:task u64:seed u32:width u32:height u8[w*h]:grid
//   u32:n_agents { str:slot i32:x i32:y u8:dir str:team }   slot order
//   u32:n_teams  { str:team i64:score }                     team order
//   u64:step u64:episode u32:turn u8:flags u64[313]:rng
// where str = u32 length + bytes.
namespace mosaic::env {

namespace {

constexpr std::uint16_t kStateVersion = 1;
constexpr char kMagic[4] = {'M', 'S', 'T', 'E'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void str(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const void* p, std::size_t n) {
    auto b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  std::string str() {
    auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw ValidationError("state", "truncated state encoding");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

Bytes encode_state(const EnvState& s) {
  Writer w;
  w.raw(kMagic, 4);
  w.put(kStateVersion);
  w.str(s.task_id);
  w.put(s.seed);
  w.put(static_cast<std::uint32_t>(s.width));
  w.put(static_cast<std::uint32_t>(s.height));
  for (Cell c : s.grid) w.put(static_cast<std::uint8_t>(c));
  w.put(static_cast<std::uint32_t>(s.agent_positions.size()));
  for (const auto& [slot, pos] : s.agent_positions) {
    w.str(slot);
    w.put(static_cast<std::int32_t>(pos.x));
    w.put(static_cast<std::int32_t>(pos.y));
    w.put(static_cast<std::uint8_t>(s.agent_orientations.at(slot)));
    w.str(s.team_of.at(slot));
  }
  w.put(static_cast<std::uint32_t>(s.score.size()));
  for (const auto& [team, score] : s.score) {
    w.str(team);
    w.put(score);
  }
  w.put(s.step_index);
  w.put(s.episode_index);
  w.put(s.turn);
  w.put(static_cast<std::uint8_t>((s.terminated ? 1 : 0) | (s.truncated ? 2 : 0)));
  for (auto word : s.rng.state_words()) w.put(word);
  return w.take();
}

EnvState decode_state(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.raw(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ValidationError("state", "bad magic");
  if (auto v = r.get<std::uint16_t>(); v != kStateVersion) {
    throw ValidationError("state", "unsupported state version " + std::to_string(v));
  }
  EnvState s;
  s.task_id = r.str();
  const TaskInfo& info = task_info(s.task_id);
  s.seed = r.get<std::uint64_t>();
  s.width = static_cast<int>(r.get<std::uint32_t>());
  s.height = static_cast<int>(r.get<std::uint32_t>());
  if (s.width != info.width || s.height != info.height) throw ValidationError("state", "grid size mismatch");
  for (auto b : r.raw(static_cast<std::size_t>(s.width * s.height))) {
    if (b > static_cast<std::uint8_t>(Cell::goal)) throw ValidationError("state", "bad cell");
    s.grid.push_back(static_cast<Cell>(b));
  }
  auto n_agents = r.get<std::uint32_t>();
  if (n_agents != info.slots.size()) throw ValidationError("state", "agent count mismatch");
  for (std::uint32_t i = 0; i < n_agents; ++i) {
    auto slot = r.str();
    Pos p{r.get<std::int32_t>(), r.get<std::int32_t>()};
    auto dir = r.get<std::uint8_t>();
    if (p.x < 0 || p.y < 0 || p.x >= s.width || p.y >= s.height) throw ValidationError("state", "position out of bounds");
    if (dir > static_cast<std::uint8_t>(Direction::east)) throw ValidationError("state", "bad direction");
    s.agent_positions[slot] = p;
    s.agent_orientations[slot] = static_cast<Direction>(dir);
    s.team_of[slot] = r.str();
  }
  auto n_teams = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_teams; ++i) {
    auto team = r.str();
    s.score[team] = r.get<std::int64_t>();
  }
  s.step_index = r.get<std::uint64_t>();
  s.episode_index = r.get<std::uint64_t>();
  s.turn = r.get<std::uint32_t>();
  if (s.turn >= info.slots.size()) throw ValidationError("state", "turn out of range");
  auto flags = r.get<std::uint8_t>();
  s.terminated = flags & 1;
  s.truncated = flags & 2;
  std::vector<std::uint64_t> words(std::mt19937_64::state_size + 1);
  for (auto& w : words) w = r.get<std::uint64_t>();
  try {
    s.rng = Rng::from_state_words(words);
  } catch (const std::invalid_argument& e) {
    throw ValidationError("state.rng", e.what());
  }
  if (!r.at_end()) throw ValidationError("state", "trailing bytes");
  return s;
}

}  // namespace mosaic::env
