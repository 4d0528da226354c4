#include "mosaic/util/json.hpp"

#include <optional>
#include <set>
#include <vector>

#include "mosaic/util/errors.hpp"

namespace mosaic {

std::string canonical_dump(const Json& doc) {
  return doc.dump(-1, ' ', false, Json::error_handler_t::strict);
}

Json parse_json_or_discard(std::string_view text) {
  return Json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
}

Json parse_json_strict(std::string_view text) {
  struct Frame {
    std::set<std::string> keys;
    std::string path;
    std::string pending_key;
    bool is_object = false;
    std::size_t next_index = 0;
  };
  std::vector<Frame> frames;
  std::optional<std::string> duplicate;
  auto child_path = [&]() {
    if (frames.empty()) return std::string();
    auto& top = frames.back();
    if (top.is_object) return top.path.empty() ? top.pending_key : top.path + "." + top.pending_key;
    return top.path + "[" + std::to_string(top.next_index++) + "]";
  };
  Json::parser_callback_t cb = [&](int, Json::parse_event_t event, Json& parsed) {
    using E = Json::parse_event_t;
    switch (event) {
      case E::object_start:
      case E::array_start: {
        Frame f;
        f.path = child_path();
        f.is_object = event == E::object_start;
        frames.push_back(std::move(f));
        break;
      }
      case E::key: {
        auto& top = frames.back();
        top.pending_key = parsed.get<std::string>();
        if (!top.keys.insert(top.pending_key).second && !duplicate) {
          duplicate = top.path.empty() ? top.pending_key : top.path + "." + top.pending_key;
        }
        break;
      }
      case E::value:
        if (!frames.empty() && !frames.back().is_object) ++frames.back().next_index;
        break;
      case E::object_end:
      case E::array_end:
        frames.pop_back();
        break;
    }
    return true;
  };
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end(), cb);
  } catch (const Json::parse_error& e) {
    throw ValidationError("", std::string("invalid JSON: ") + e.what());
  }
  if (duplicate) throw ValidationError(*duplicate, "duplicate key");
  return doc;
}

}  // namespace mosaic
