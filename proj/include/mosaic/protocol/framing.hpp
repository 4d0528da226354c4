#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mosaic/util/digest.hpp"
#include "mosaic/util/json.hpp"

namespace mosaic::protocol {

/// Incremental splitter for newline-delimited streams. Bytes are fed as they
/// arrive; complete lines come out without their terminator. A line that grows
/// past `max_line` is reported once as oversized and its remainder discarded
/// up to the next newline.
class LineSplitter {
 public:
  struct Line {
    std::string text;
    bool oversized = false;
  };

  explicit LineSplitter(std::size_t max_line);

  /// Appends bytes and returns every line completed by them.
  std::vector<Line> feed(std::string_view bytes);
  /// Bytes of an unterminated trailing line (end of stream).
  const std::string& pending() const { return buffer_; }

 private:
  std::size_t max_line_;
  std::string buffer_;
  bool discarding_ = false;
};

/// Render payloads up to this size travel inline; larger ones are spilled to a
/// blob file and referenced by path and digest.
inline constexpr std::size_t kInlineRenderLimit = 64 * 1024;

/// Builds the render document carried by step_result:
///   {"encoding", "shape", "digest", "data"} inline (base64), or
///   {"encoding", "shape", "digest", "path"} when spilled under `blob_dir`.
Json make_render_payload(std::string_view encoding, const std::vector<std::int64_t>& shape,
                         const Bytes& blob, const std::filesystem::path& blob_dir);

/// Resolves a render document back to bytes, verifying the digest.
std::optional<Bytes> load_render_payload(const Json& render);

}  // namespace mosaic::protocol
