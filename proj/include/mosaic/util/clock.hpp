#pragma once

#include <atomic>
#include <chrono>
#include <memory>

namespace mosaic {

using Duration = std::chrono::nanoseconds;

/// Point on an injectable timeline, measured from the clock's own origin.
struct Timestamp {
  Duration since_origin{0};

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
  friend Duration operator-(Timestamp a, Timestamp b) { return a.since_origin - b.since_origin; }
  friend Timestamp operator+(Timestamp t, Duration d) { return {t.since_origin + d}; }
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
  /// Real time that elapses while this clock advances by `d`.
  virtual Duration to_real(Duration d) const = 0;
};

/// Monotonic wall clock.
class SteadyClock final : public Clock {
 public:
  SteadyClock();
  Timestamp now() const override;
  Duration to_real(Duration d) const override { return d; }

 private:
  std::chrono::steady_clock::time_point origin_;
};

/// Monotonic clock running `factor` times faster than real time.
class ScaledClock final : public Clock {
 public:
  explicit ScaledClock(double factor);
  Timestamp now() const override;
  Duration to_real(Duration d) const override;
  double factor() const { return factor_; }

 private:
  std::chrono::steady_clock::time_point origin_;
  double factor_;
};

/// Test clock advanced explicitly.
class ManualClock final : public Clock {
 public:
  Timestamp now() const override { return {Duration{now_.load()}}; }
  Duration to_real(Duration d) const override { return d; }
  void set(Duration since_origin) { now_.store(since_origin.count()); }
  void advance(Duration d) { now_.fetch_add(d.count()); }

 private:
  std::atomic<Duration::rep> now_{0};
};

std::shared_ptr<Clock> default_clock();

}  // namespace mosaic
