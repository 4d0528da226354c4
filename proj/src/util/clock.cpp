#include "mosaic/util/clock.hpp"

#include <stdexcept>

namespace mosaic {

SteadyClock::SteadyClock() : origin_(std::chrono::steady_clock::now()) {}

Timestamp SteadyClock::now() const {
  return {std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - origin_)};
}

ScaledClock::ScaledClock(double factor)
    : origin_(std::chrono::steady_clock::now()), factor_(factor) {
  if (!(factor > 0)) throw std::invalid_argument("ScaledClock: factor must be positive");
}

Timestamp ScaledClock::now() const {
  auto real = std::chrono::steady_clock::now() - origin_;
  return {Duration{static_cast<Duration::rep>(static_cast<double>(
      std::chrono::duration_cast<Duration>(real).count()) * factor_)}};
}

Duration ScaledClock::to_real(Duration d) const {
  return Duration{static_cast<Duration::rep>(static_cast<double>(d.count()) / factor_)};
}

std::shared_ptr<Clock> default_clock() {
  static auto clock = std::make_shared<SteadyClock>();
  return clock;
}

}  // namespace mosaic
