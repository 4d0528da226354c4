#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mosaic/util/json.hpp"

namespace mosaic::protocol {

/// Names of the schema documents compiled into the binary from schemas/v1/.
std::vector<std::string> embedded_schema_names();

/// Raw text of an embedded schema, or nullopt when unknown.
std::optional<std::string_view> embedded_schema_text(std::string_view name);

/// Parsed schema; throws std::out_of_range for unknown names.
const Json& schema(std::string_view name);

struct SchemaViolation {
  std::string path;  // dotted path, e.g. "player_workers.green_0.worker_type"
  std::string message;
};

// Supported keywords: type, properties, required, enum, minimum, maximum,
// minLength, minItems, minProperties, items, additionalProperties (schema
// form only).
// Unlisted properties are accepted so newer minor versions can add keys.
std::optional<SchemaViolation> validate(const Json& doc, const Json& schema_doc,
                                        const std::string& path = "");

}  // namespace mosaic::protocol
