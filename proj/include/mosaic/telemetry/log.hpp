#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

// Append-only line log with an optional sidecar index.
//
// Every append is one complete line ending in '\n'. A crash can leave a
// partial final line; open() cuts the file back to the last '\n' so readers
// only ever see whole records. The index sidecar (<log>.idx) holds fixed
// 24-byte little-endian entries {episode, step, offset}, one per distinct
// (episode, step) in append order, so lookups binary-search it with pread.
namespace mosaic::telemetry {

struct IndexKey {
  std::uint64_t episode = 0;
  std::uint64_t step = 0;
  friend auto operator<=>(const IndexKey&, const IndexKey&) = default;
};

class JsonlLog {
 public:
  struct OpenReport {
    std::uint64_t truncated_bytes = 0;
    bool index_rebuilt = false;
    std::uint64_t lines = 0;
  };

  /// Creates the file when missing. With `indexed`, lines must carry integer
  /// "episode_index" and "step_index" fields.
  static JsonlLog open(const std::filesystem::path& path, bool indexed);

  JsonlLog(JsonlLog&& other) noexcept;
  JsonlLog& operator=(JsonlLog&& other) noexcept;
  JsonlLog(const JsonlLog&) = delete;
  ~JsonlLog();

  /// Appends one line (newline included). Indexed logs need a key no smaller
  /// than the previous one. Returns the line's byte offset.
  std::uint64_t append(std::string_view line, std::optional<IndexKey> key = std::nullopt);

  /// Pushes buffered bytes to the OS; with `durable`, also fsyncs.
  void flush(bool durable = false);

  std::uint64_t size() const { return size_; }
  std::uint64_t lines() const { return lines_; }
  const OpenReport& open_report() const { return report_; }
  const std::filesystem::path& path() const { return path_; }

  /// Offset of the first line with this key, via binary search of the index.
  std::optional<std::uint64_t> find(IndexKey key) const;
  /// Index reads performed by the most recent find().
  int last_find_reads() const { return last_find_reads_; }
  std::string read_line_at(std::uint64_t offset) const;

  /// Visits each complete line (without its newline) in file order.
  static void for_each_line(const std::filesystem::path& path, const std::function<void(std::string_view)>& fn);

 private:
  JsonlLog() = default;
  void rebuild_index();
  void close();

  std::filesystem::path path_;
  int fd_ = -1;
  int index_fd_ = -1;
  bool indexed_ = false;
  std::uint64_t size_ = 0;
  std::uint64_t lines_ = 0;
  std::uint64_t index_entries_ = 0;
  std::optional<IndexKey> last_key_;
  std::string buffer_;
  std::string index_buffer_;
  OpenReport report_;
  mutable int last_find_reads_ = 0;
};

}  // namespace mosaic::telemetry
