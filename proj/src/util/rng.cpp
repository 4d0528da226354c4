#include "mosaic/util/rng.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace mosaic {

std::uint64_t Rng::uniform_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
  // (2^64 - bound) % bound == 2^64 % bound
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

std::vector<std::uint64_t> Rng::state_words() const {
  // The engine's state is only reachable through its stream operators.
  std::ostringstream os;
  os << engine_;
  const std::string text = os.str();
  std::vector<std::uint64_t> words;
  words.reserve(std::mt19937_64::state_size + 1);
  const char* p = text.data();
  const char* end = p + text.size();
  while (p < end) {
    std::uint64_t w = 0;
    auto [next, ec] = std::from_chars(p, end, w);
    if (ec != std::errc()) break;
    words.push_back(w);
    p = next + (next < end ? 1 : 0);
  }
  return words;
}

Rng Rng::from_state_words(const std::vector<std::uint64_t>& words) {
  if (words.size() != std::mt19937_64::state_size + 1 ||
      words.back() > std::mt19937_64::state_size) {
    throw std::invalid_argument("rng state: expected 313 words with index <= 312");
  }
  std::string text(words.size() * 21, ' ');
  char* p = text.data();
  for (auto w : words) {
    p = std::to_chars(p, text.data() + text.size(), w).ptr;
    *p++ = ' ';
  }
  text.resize(static_cast<std::size_t>(p - text.data()));
  std::istringstream is(text);
  Rng rng;
  is >> rng.engine_;
  if (is.fail()) throw std::invalid_argument("rng state: unreadable");
  return rng;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return mix64(mix64(mix64(base) ^ stream) ^ index) & kMaxSeed;
}

}  // namespace mosaic
