#include "mosaic/telemetry/log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "mosaic/util/errors.hpp"
#include "mosaic/util/json.hpp"

namespace mosaic::telemetry {

namespace {

constexpr std::size_t kEntrySize = 24;
constexpr std::size_t kBufferLimit = 1 << 16;

[[noreturn]] void io_error(const std::string& what, const std::filesystem::path& p) {
  throw MosaicError(what + " " + p.string() + ": " + std::strerror(errno));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void write_all(int fd, const std::string& data, const std::filesystem::path& p) {
  std::size_t done = 0;
  while (done < data.size()) {
    auto n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_error("cannot write", p);
    }
    done += static_cast<std::size_t>(n);
  }
}

std::optional<IndexKey> key_of(std::string_view line) {
  Json doc = parse_json_or_discard(line);
  if (!doc.is_object()) return std::nullopt;
  auto e = doc.find("episode_index");
  auto s = doc.find("step_index");
  if (e == doc.end() || s == doc.end() || !e->is_number_unsigned() || !s->is_number_unsigned()) return std::nullopt;
  return IndexKey{e->get<std::uint64_t>(), s->get<std::uint64_t>()};
}

struct Entry {
  IndexKey key;
  std::uint64_t offset;
};

std::optional<Entry> read_entry(int fd, std::uint64_t i) {
  unsigned char buf[kEntrySize];
  if (::pread(fd, buf, kEntrySize, static_cast<off_t>(i * kEntrySize)) != static_cast<ssize_t>(kEntrySize)) {
    return std::nullopt;
  }
  return Entry{{get_u64(buf), get_u64(buf + 8)}, get_u64(buf + 16)};
}

}  // namespace

void JsonlLog::for_each_line(const std::filesystem::path& path, const std::function<void(std::string_view)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // unterminated tail
    fn(line);
  }
}

JsonlLog JsonlLog::open(const std::filesystem::path& path, bool indexed) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  JsonlLog log;
  log.path_ = path;
  log.indexed_ = indexed;
  log.fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (log.fd_ < 0) io_error("cannot open", path);

  // Heal: drop everything after the last newline.
  const auto file_size = static_cast<std::uint64_t>(::lseek(log.fd_, 0, SEEK_END));
  std::uint64_t keep = 0;
  {
    std::ifstream in(path, std::ios::binary);
    std::string chunk(1 << 16, '\0');
    std::uint64_t pos = 0;
    while (in) {
      in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
      auto got = static_cast<std::size_t>(in.gcount());
      for (std::size_t i = 0; i < got; ++i) {
        if (chunk[i] == '\n') {
          keep = pos + i + 1;
          ++log.lines_;
        }
      }
      pos += got;
    }
  }
  if (keep < file_size) {
    if (::ftruncate(log.fd_, static_cast<off_t>(keep)) != 0) io_error("cannot truncate", path);
    log.report_.truncated_bytes = file_size - keep;
  }
  log.size_ = keep;
  ::lseek(log.fd_, 0, SEEK_END);
  log.report_.lines = log.lines_;

  if (indexed) {
    const auto index_path = path.string() + ".idx";
    log.index_fd_ = ::open(index_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (log.index_fd_ < 0) io_error("cannot open", index_path);
    const auto index_size = static_cast<std::uint64_t>(::lseek(log.index_fd_, 0, SEEK_END));
    bool valid = index_size % kEntrySize == 0;
    std::uint64_t n = index_size / kEntrySize;
    // Entries pointing past the healed end belong to lost lines.
    while (valid && n > 0) {
      auto last = read_entry(log.index_fd_, n - 1);
      if (!last) {
        valid = false;
        break;
      }
      if (last->offset < log.size_) break;
      --n;
    }
    if (valid && n > 0) {
      auto last = read_entry(log.index_fd_, n - 1);
      valid = last && key_of(log.read_line_at(last->offset)) == last->key;
      if (valid) log.last_key_ = last->key;
    }
    if (valid) {
      // The final line's key must be the last indexed one.
      std::optional<IndexKey> tail;
      if (log.size_ > 0) {
        std::uint64_t start = log.size_ - 1;
        char c;
        while (start > 0 && ::pread(log.fd_, &c, 1, static_cast<off_t>(start - 1)) == 1 && c != '\n') --start;
        tail = key_of(log.read_line_at(start));
      }
      valid = tail == log.last_key_;
    }
    if (valid) {
      if (n * kEntrySize != index_size && ::ftruncate(log.index_fd_, static_cast<off_t>(n * kEntrySize)) != 0) {
        io_error("cannot truncate", index_path);
      }
      log.index_entries_ = n;
      ::lseek(log.index_fd_, 0, SEEK_END);
    } else {
      log.rebuild_index();
    }
  }
  return log;
}

void JsonlLog::rebuild_index() {
  report_.index_rebuilt = true;
  if (::ftruncate(index_fd_, 0) != 0) io_error("cannot truncate", path_.string() + ".idx");
  ::lseek(index_fd_, 0, SEEK_SET);
  index_entries_ = 0;
  last_key_.reset();
  std::string out;
  std::uint64_t offset = 0;
  for_each_line(path_, [&](std::string_view line) {
    auto key = key_of(line);
    if (key && (!last_key_ || *key > *last_key_)) {
      put_u64(out, key->episode);
      put_u64(out, key->step);
      put_u64(out, offset);
      ++index_entries_;
      last_key_ = key;
    }
    offset += line.size() + 1;
  });
  write_all(index_fd_, out, path_.string() + ".idx");
}

JsonlLog::JsonlLog(JsonlLog&& o) noexcept { *this = std::move(o); }

JsonlLog& JsonlLog::operator=(JsonlLog&& o) noexcept {
  if (this != &o) {
    close();
    path_ = std::move(o.path_);
    fd_ = std::exchange(o.fd_, -1);
    index_fd_ = std::exchange(o.index_fd_, -1);
    indexed_ = o.indexed_;
    size_ = o.size_;
    lines_ = o.lines_;
    index_entries_ = o.index_entries_;
    last_key_ = o.last_key_;
    buffer_ = std::move(o.buffer_);
    index_buffer_ = std::move(o.index_buffer_);
    report_ = o.report_;
  }
  return *this;
}

JsonlLog::~JsonlLog() { close(); }

void JsonlLog::close() {
  if (fd_ >= 0) {
    try {
      flush(false);
    } catch (...) {
    }
    ::close(fd_);
    fd_ = -1;
  }
  if (index_fd_ >= 0) {
    ::close(index_fd_);
    index_fd_ = -1;
  }
}

std::uint64_t JsonlLog::append(std::string_view line, std::optional<IndexKey> key) {
  if (line.empty() || line.back() != '\n' || line.find('\n') != line.size() - 1) {
    throw ValidationError("line", "must be exactly one newline-terminated line");
  }
  if (indexed_) {
    if (!key) throw ValidationError("key", "indexed log needs a key");
    if (last_key_ && *key < *last_key_) throw StateError("telemetry out of order");
  }
  const std::uint64_t offset = size_;
  buffer_.append(line);
  size_ += line.size();
  ++lines_;
  if (indexed_ && (!last_key_ || *key > *last_key_)) {
    put_u64(index_buffer_, key->episode);
    put_u64(index_buffer_, key->step);
    put_u64(index_buffer_, offset);
    ++index_entries_;
    last_key_ = key;
  }
  if (buffer_.size() >= kBufferLimit) flush(false);
  return offset;
}

void JsonlLog::flush(bool durable) {
  // Log before index: an index entry never points at bytes not yet written.
  if (!buffer_.empty()) {
    write_all(fd_, buffer_, path_);
    buffer_.clear();
  }
  if (!index_buffer_.empty()) {
    write_all(index_fd_, index_buffer_, path_.string() + ".idx");
    index_buffer_.clear();
  }
  if (durable) {
    ::fdatasync(fd_);
    if (index_fd_ >= 0) ::fdatasync(index_fd_);
  }
}

std::optional<std::uint64_t> JsonlLog::find(IndexKey key) const {
  last_find_reads_ = 0;
  if (!indexed_) return std::nullopt;
  const_cast<JsonlLog*>(this)->flush(false);
  std::uint64_t lo = 0, hi = index_entries_;
  while (lo < hi) {
    std::uint64_t mid = lo + (hi - lo) / 2;
    auto e = read_entry(index_fd_, mid);
    ++last_find_reads_;
    if (!e) return std::nullopt;
    if (e->key == key) return e->offset;
    if (e->key < key) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return std::nullopt;
}

std::string JsonlLog::read_line_at(std::uint64_t offset) const {
  if (!buffer_.empty()) const_cast<JsonlLog*>(this)->flush(false);
  std::string out;
  char buf[4096];
  for (;;) {
    auto n = ::pread(fd_, buf, sizeof buf, static_cast<off_t>(offset + out.size()));
    if (n <= 0) return out;
    auto* nl = static_cast<char*>(std::memchr(buf, '\n', static_cast<std::size_t>(n)));
    if (nl) {
      out.append(buf, static_cast<std::size_t>(nl - buf));
      return out;
    }
    out.append(buf, static_cast<std::size_t>(n));
  }
}

}  // namespace mosaic::telemetry
