#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace mosaic {

// nlohmann::json keeps object members in a std::map, so dump() already emits
// keys in lexicographic byte order. All wire and telemetry output goes through
// canonical_dump so the compact separators and strict UTF-8 handling are fixed
// in one place.
using Json = nlohmann::json;

/// Compact, key-sorted, single-line serialization. Throws Json::type_error on
/// invalid UTF-8 in string values.
std::string canonical_dump(const Json& doc);

/// Parses a document, returning a discarded value on syntax errors.
Json parse_json_or_discard(std::string_view text);

/// Parses a user-authored document. Throws ValidationError on syntax errors
/// and on duplicate object keys (which plain parsing silently collapses),
/// naming the duplicated key's path.
Json parse_json_strict(std::string_view text);

}  // namespace mosaic
