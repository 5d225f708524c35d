#pragma once

// Strict readers for JSON documents: required keys, exact types, unknown keys
// rejected. Failures throw Error{SchemaError} with the offending path.

#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "bioinvert/error.hpp"
#include "json.hpp"

namespace bioinvert::schema {

using Json = nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& message) {
  throw Error(ErrorCode::SchemaError, message + " at " + (path.empty() ? "/" : path), path.empty() ? "/" : path);
}

inline std::string child(const std::string& path, std::string_view key) {
  return path + "/" + std::string(key);
}

inline std::string child(const std::string& path, std::size_t index) {
  return path + "/" + std::to_string(index);
}

inline void expect_object(const Json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected object");
}

inline void expect_array(const Json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected array");
}

inline void allow_keys(const Json& j, const std::string& path, std::initializer_list<std::string_view> keys) {
  expect_object(j, path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (auto k : keys) known = known || it.key() == k;
    if (!known) fail(child(path, it.key()), "unknown field '" + it.key() + "'");
  }
}

inline const Json& require(const Json& j, std::string_view key, const std::string& path) {
  expect_object(j, path);
  auto it = j.find(std::string(key));
  if (it == j.end()) fail(child(path, key), "missing required field '" + std::string(key) + "'");
  return *it;
}

inline std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected string");
  return j.get<std::string>();
}

inline double as_number(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected number");
  return j.get<double>();
}

inline std::uint64_t as_uint(const Json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    fail(path, "expected non-negative integer");
  return j.get<std::uint64_t>();
}

inline bool as_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected boolean");
  return j.get<bool>();
}

inline std::vector<std::string> as_string_array(const Json& j, const std::string& path) {
  expect_array(j, path);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_string(j[i], child(path, i)));
  return out;
}

inline std::string get_string(const Json& j, std::string_view key, const std::string& path) {
  return as_string(require(j, key, path), child(path, key));
}

inline std::vector<std::string> get_string_array(const Json& j, std::string_view key, const std::string& path) {
  return as_string_array(require(j, key, path), child(path, key));
}

inline Json parse(std::string_view document, const std::string& path = "/") {
  try {
    return Json::parse(document);
  } catch (const Json::parse_error& e) {
    fail(path, std::string("malformed document: ") + e.what());
  }
}

}  // namespace bioinvert::schema
