// Copyright 2026 The paostruct Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "paostruct/json.hpp"

#include <sstream>

#include "paostruct/error.hpp"

namespace paostruct {

namespace {

std::string join_path(std::string_view path, std::string_view key) {
  std::string out(path);
  if (!out.empty()) out.push_back('.');
  out += key;
  return out;
}

std::string type_name(const Json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

bool type_matches(const Json& v, std::string_view type) {
  if (type == "string") return v.is_string();
  if (type == "number") return v.is_number();
  if (type == "integer") return v.is_number_integer();
  if (type == "boolean") return v.is_boolean();
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "null") return v.is_null();
  return false;
}

}  // namespace

Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const std::size_t offset = e.byte == 0 ? 0 : e.byte - 1;
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream msg;
    msg << what << " at line " << line << ", column " << col << " (byte " << offset
        << "): " << e.what();
    throw Error(ErrorCode::kParseError, msg.str());
  }
}

std::string dump_compact(const Json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string dump_pretty(const Json& j) {
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

const Json& require_field(const Json& obj, std::string_view key, std::string_view path) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::kParseError, std::string(path) + ": expected object");
  }
  auto it = obj.find(std::string(key));
  if (it == obj.end()) {
    throw Error(ErrorCode::kParseError, join_path(path, key) + ": missing field");
  }
  return *it;
}

std::string require_string(const Json& obj, std::string_view key, std::string_view path) {
  const Json& v = require_field(obj, key, path);
  if (!v.is_string()) {
    throw Error(ErrorCode::kParseError,
                join_path(path, key) + ": expected string, got " + type_name(v));
  }
  return v.get<std::string>();
}

const Json& require_array(const Json& obj, std::string_view key, std::string_view path) {
  const Json& v = require_field(obj, key, path);
  if (!v.is_array()) {
    throw Error(ErrorCode::kParseError,
                join_path(path, key) + ": expected array, got " + type_name(v));
  }
  return v;
}

std::optional<std::string> optional_string(const Json& obj, std::string_view key,
                                           std::string_view path) {
  if (!obj.is_object()) return std::nullopt;
  auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(ErrorCode::kParseError,
                join_path(path, key) + ": expected string, got " + type_name(*it));
  }
  return it->get<std::string>();
}

std::optional<std::string> validate_against_schema(const Json& value, const Json& schema,
                                                   const std::string& path) {
  if (!schema.is_object()) return std::nullopt;

  if (auto t = schema.find("type"); t != schema.end()) {
    bool ok = false;
    std::string expected;
    if (t->is_string()) {
      expected = t->get<std::string>();
      ok = type_matches(value, expected);
    } else if (t->is_array()) {
      for (const auto& alt : *t) {
        if (!expected.empty()) expected += "|";
        expected += alt.get<std::string>();
        ok = ok || type_matches(value, alt.get<std::string>());
      }
    }
    if (!ok) return path + ": expected " + expected + ", got " + type_name(value);
  }

  if (auto e = schema.find("enum"); e != schema.end() && e->is_array()) {
    bool found = false;
    for (const auto& option : *e) found = found || option == value;
    if (!found) return path + ": value " + dump_compact(value) + " not in enum";
  }

  if (value.is_string()) {
    if (auto m = schema.find("minLength"); m != schema.end()) {
      if (value.get<std::string>().size() < m->get<std::size_t>()) {
        return path + ": shorter than " + std::to_string(m->get<std::size_t>());
      }
    }
  }

  if (value.is_number()) {
    const double v = value.get<double>();
    if (auto m = schema.find("minimum"); m != schema.end() && m->is_number() && v < m->get<double>()) {
      return path + ": below minimum " + dump_compact(*m);
    }
    if (auto m = schema.find("maximum"); m != schema.end() && m->is_number() && v > m->get<double>()) {
      return path + ": above maximum " + dump_compact(*m);
    }
  }

  if (value.is_object()) {
    if (auto req = schema.find("required"); req != schema.end()) {
      for (const auto& name : *req) {
        if (!value.contains(name.get<std::string>())) {
          return path + "." + name.get<std::string>() + ": missing required field";
        }
      }
    }
    const auto props = schema.find("properties");
    if (props != schema.end()) {
      for (const auto& [name, sub] : props->items()) {
        if (auto it = value.find(name); it != value.end()) {
          if (auto err = validate_against_schema(*it, sub, path + "." + name)) return err;
        }
      }
    }
    if (auto ap = schema.find("additionalProperties");
        ap != schema.end() && ap->is_boolean() && !ap->get<bool>()) {
      for (const auto& [name, _] : value.items()) {
        if (props == schema.end() || !props->contains(name)) {
          return path + "." + name + ": unexpected field";
        }
      }
    }
  }

  if (value.is_array()) {
    if (auto m = schema.find("minItems"); m != schema.end()) {
      if (value.size() < m->get<std::size_t>()) {
        return path + ": fewer than " + std::to_string(m->get<std::size_t>()) + " items";
      }
    }
    if (auto items = schema.find("items"); items != schema.end()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (auto err = validate_against_schema(value[i], *items,
                                               path + "[" + std::to_string(i) + "]")) {
          return err;
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace paostruct
