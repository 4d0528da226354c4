#include "mosaic/protocol/framing.hpp"

#include <fstream>
#include <system_error>

namespace mosaic::protocol {

LineSplitter::LineSplitter(std::size_t max_line) : max_line_(max_line) {}

std::vector<LineSplitter::Line> LineSplitter::feed(std::string_view bytes) {
  std::vector<Line> out;
  while (!bytes.empty()) {
    auto nl = bytes.find('\n');
    std::string_view chunk = bytes.substr(0, nl);
    if (!discarding_) {
      buffer_.append(chunk);
      if (buffer_.size() > max_line_) {
        out.push_back({buffer_.substr(0, 256), true});
        buffer_.clear();
        discarding_ = true;
      }
    }
    if (nl == std::string_view::npos) break;
    if (discarding_) {
      discarding_ = false;
    } else {
      if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
      out.push_back({std::move(buffer_), false});
      buffer_.clear();
    }
    bytes.remove_prefix(nl + 1);
  }
  return out;
}

Json make_render_payload(std::string_view encoding, const std::vector<std::int64_t>& shape,
                         const Bytes& blob, const std::filesystem::path& blob_dir) {
  const std::string digest = sha256_hex(blob);
  Json doc{{"encoding", std::string(encoding)}, {"shape", shape}, {"digest", digest}};
  if (blob.size() <= kInlineRenderLimit) {
    doc["data"] = base64_encode(blob);
    return doc;
  }
  std::filesystem::create_directories(blob_dir);
  const auto path = blob_dir / (digest + ".bin");
  if (!std::filesystem::exists(path)) {
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
      if (!out) throw std::system_error(errno, std::generic_category(), "writing blob " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }
  doc["path"] = path.string();
  return doc;
}

std::optional<Bytes> load_render_payload(const Json& render) {
  if (!render.is_object() || !render.contains("digest")) return std::nullopt;
  std::optional<Bytes> bytes;
  if (auto d = render.find("data"); d != render.end() && d->is_string()) {
    bytes = base64_decode(d->get<std::string>());
  } else if (auto p = render.find("path"); p != render.end() && p->is_string()) {
    std::ifstream in(p->get<std::string>(), std::ios::binary);
    if (!in) return std::nullopt;
    bytes = Bytes(std::istreambuf_iterator<char>(in), {});
  }
  if (!bytes || sha256_hex(*bytes) != render["digest"].get<std::string>()) return std::nullopt;
  return bytes;
}

}  // namespace mosaic::protocol
