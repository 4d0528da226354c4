#include "mosaic/protocol/schema.hpp"

#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace mosaic::protocol {

// Generated at configure time from schemas/v1/*.json.
const std::vector<std::pair<std::string_view, std::string_view>>& generated_schema_table();

namespace {

const std::map<std::string, Json, std::less<>>& parsed_schemas() {
  static const auto table = [] {
    std::map<std::string, Json, std::less<>> out;
    for (const auto& [name, text] : generated_schema_table()) {
      out.emplace(std::string(name), Json::parse(text));
    }
    return out;
  }();
  return table;
}

bool has_type(const Json& value, std::string_view type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "boolean") return value.is_boolean();
  if (type == "integer") return value.is_number_integer();
  if (type == "number") return value.is_number();
  if (type == "null") return value.is_null();
  return false;
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

}  // namespace

std::vector<std::string> embedded_schema_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : generated_schema_table()) names.emplace_back(name);
  return names;
}

std::optional<std::string_view> embedded_schema_text(std::string_view name) {
  for (const auto& [n, text] : generated_schema_table()) {
    if (n == name) return text;
  }
  return std::nullopt;
}

const Json& schema(std::string_view name) {
  const auto& table = parsed_schemas();
  auto it = table.find(name);
  if (it == table.end()) throw std::out_of_range("no embedded schema named " + std::string(name));
  return it->second;
}

std::optional<SchemaViolation> validate(const Json& doc, const Json& s, const std::string& path) {
  if (auto t = s.find("type"); t != s.end()) {
    bool ok = false;
    if (t->is_string()) {
      ok = has_type(doc, t->get<std::string>());
    } else {
      for (const auto& alt : *t) ok = ok || has_type(doc, alt.get<std::string>());
    }
    if (!ok) return SchemaViolation{path, "expected type " + t->dump()};
  }
  if (auto e = s.find("enum"); e != s.end()) {
    bool found = false;
    for (const auto& option : *e) found = found || option == doc;
    if (!found) return SchemaViolation{path, "value " + doc.dump() + " not in " + e->dump()};
  }
  if (doc.is_number()) {
    if (auto m = s.find("minimum"); m != s.end() && doc.get<double>() < m->get<double>()) {
      return SchemaViolation{path, "below minimum " + m->dump()};
    }
    if (auto m = s.find("maximum"); m != s.end() && doc.get<double>() > m->get<double>()) {
      return SchemaViolation{path, "above maximum " + m->dump()};
    }
  }
  if (doc.is_string()) {
    if (auto m = s.find("minLength"); m != s.end() && doc.get_ref<const std::string&>().size() < m->get<std::size_t>()) {
      return SchemaViolation{path, "shorter than " + m->dump()};
    }
  }
  if (doc.is_array()) {
    if (auto m = s.find("minItems"); m != s.end() && doc.size() < m->get<std::size_t>()) {
      return SchemaViolation{path, "fewer than " + m->dump() + " items"};
    }
    if (auto items = s.find("items"); items != s.end()) {
      for (std::size_t i = 0; i < doc.size(); ++i) {
        if (auto v = validate(doc[i], *items, path + "[" + std::to_string(i) + "]")) return v;
      }
    }
  }
  if (doc.is_object()) {
    if (auto m = s.find("minProperties"); m != s.end() && doc.size() < m->get<std::size_t>()) {
      return SchemaViolation{path, "fewer than " + m->dump() + " members"};
    }
    if (auto req = s.find("required"); req != s.end()) {
      for (const auto& key : *req) {
        if (!doc.contains(key.get<std::string>())) {
          return SchemaViolation{join(path, key.get<std::string>()), "required field missing"};
        }
      }
    }
    const auto props = s.find("properties");
    for (const auto& [key, value] : doc.items()) {
      if (props != s.end()) {
        if (auto p = props->find(key); p != props->end()) {
          if (auto v = validate(value, *p, join(path, key))) return v;
          continue;
        }
      }
      if (auto extra = s.find("additionalProperties"); extra != s.end() && extra->is_object()) {
        if (auto v = validate(value, *extra, join(path, key))) return v;
      }
    }
  }
  return std::nullopt;
}

}  // namespace mosaic::protocol
