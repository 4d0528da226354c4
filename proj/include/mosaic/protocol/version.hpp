#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace mosaic::protocol {

struct SemVer {
  int major = 0;
  int minor = 0;
  int patch = 0;

  /// Accepts exactly MAJOR.MINOR.PATCH with non-negative decimal parts.
  static std::optional<SemVer> parse(std::string_view text);
  std::string str() const;

  friend auto operator<=>(const SemVer&, const SemVer&) = default;
};

/// Version spoken by this build, stamped on every message as "v".
inline constexpr SemVer kProtocolVersion{1, 0, 0};

}  // namespace mosaic::protocol
