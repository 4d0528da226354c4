#include "mosaic/util/reward.hpp"

#include <cmath>

namespace mosaic {

Reward Reward::from_double(double value) {
  return Reward(static_cast<std::int64_t>(std::llround(value * 1000.0)));
}

}  // namespace mosaic
