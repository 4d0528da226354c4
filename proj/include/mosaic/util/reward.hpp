#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace mosaic {

/// Reward carried as an exact count of thousandths so that sums reconcile
/// exactly and serialization is byte-deterministic.
class Reward {
 public:
  constexpr Reward() = default;
  static constexpr Reward from_milli(std::int64_t milli) { return Reward(milli); }
  static constexpr Reward from_int(std::int64_t whole) { return Reward(whole * 1000); }
  /// Rounds to the nearest thousandth.
  static Reward from_double(double value);

  constexpr std::int64_t milli() const { return milli_; }
  double to_double() const { return static_cast<double>(milli_) / 1000.0; }

  constexpr Reward& operator+=(Reward o) {
    milli_ += o.milli_;
    return *this;
  }
  friend constexpr Reward operator+(Reward a, Reward b) { return Reward(a.milli_ + b.milli_); }
  friend constexpr Reward operator-(Reward a) { return Reward(-a.milli_); }
  friend constexpr auto operator<=>(Reward, Reward) = default;

 private:
  constexpr explicit Reward(std::int64_t milli) : milli_(milli) {}
  std::int64_t milli_ = 0;
};

}  // namespace mosaic
