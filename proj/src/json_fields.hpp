#pragma once

// Strict JSON field access with diagnostics that name the field and, when
// it can be found in the source text, its line.

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "earnet/error.hpp"
#include "earnet/simulator.hpp"

namespace earnet::detail {

using nlohmann::json;

/// 1-based line of the first occurrence of `"key"` in `text`, or 0.
inline std::size_t line_of_key(std::string_view text, std::string_view key) {
  const std::string quoted = "\"" + std::string(key) + "\"";
  const auto pos = text.find(quoted);
  if (pos == std::string_view::npos) return 0;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

/// Parses `text`, turning syntax errors into InvalidConfig with line:column.
inline json parse_json(std::string_view text, std::string_view source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    if (const auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
    throw Error(ErrorCode::InvalidConfig,
                std::string(source) + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
}

class Fields {
 public:
  Fields(const json& j, std::string path, std::string_view text, std::string_view source)
      : j_(j), path_(std::move(path)), text_(text), source_(source) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(std::string_view key, const std::string& what) const {
    std::string where(source_);
    if (const auto line = key.empty() ? 0 : line_of_key(text_, key)) where += ":" + std::to_string(line);
    const std::string field = key.empty() ? (path_.empty() ? "/" : path_) : path_ + "/" + std::string(key);
    throw Error(ErrorCode::InvalidConfig, where + ": field '" + field + "': " + what);
  }

  bool has(std::string_view key) const { return j_.contains(key); }

  const json& at(std::string_view key) {
    seen_.insert(std::string(key));
    if (!j_.contains(key)) fail(key, "missing required field");
    return j_.at(std::string(key));
  }

  double number(std::string_view key, double fallback) {
    seen_.insert(std::string(key));
    return has(key) ? number(key) : fallback;
  }
  double number(std::string_view key) {
    const auto& v = at(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }

  std::uint64_t uint(std::string_view key, std::uint64_t fallback) {
    seen_.insert(std::string(key));
    return has(key) ? uint(key) : fallback;
  }
  std::uint64_t uint(std::string_view key) {
    const auto& v = at(key);
    if (!v.is_number_unsigned()) fail(key, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(std::string_view key) {
    const auto& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  Fields object(std::string_view key) {
    const auto& v = at(key);
    if (!v.is_object()) fail(key, "expected an object");
    return Fields(v, path_ + "/" + std::string(key), text_, source_);
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) fail(k, "unknown field");
    }
  }

  const std::string& path() const { return path_; }
  std::string_view text() const { return text_; }
  std::string_view source() const { return source_; }

 private:
  const json& j_;
  std::string path_;
  std::string_view text_;
  std::string_view source_;
  std::set<std::string> seen_;
};

}  // namespace earnet::detail

namespace earnet::detail {

/// Reads and validates a simulation config object; defined with the serializers.
SimulationConfig read_config(Fields& f);

}  // namespace earnet::detail
