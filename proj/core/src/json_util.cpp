#include "json_util.hpp"

#include <string>

#include "langsup/error.hpp"

namespace langsup::detail {

namespace {

std::string location(std::string_view text, std::size_t byte, std::string_view origin) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::string(origin) + ":" + std::to_string(line) + ":" + std::to_string(col);
}

}  // namespace

json parse_json(std::string_view text, std::string_view origin) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw_validation(location(text, at, origin) + ": malformed JSON (" + e.what() + ")");
  }
}

json parse_json_relaxed(std::string_view text, std::string_view origin) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < text.size()) {
        out.push_back(text[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    auto starts = [&](std::string_view tok) { return text.substr(i, tok.size()) == tok; };
    if (starts("-Infinity")) {
      out += "\"-Infinity\"";
      i += 8;
    } else if (starts("Infinity")) {
      out += "\"Infinity\"";
      i += 7;
    } else if (starts("NaN")) {
      out += "\"NaN\"";
      i += 2;
    } else {
      out.push_back(c);
    }
  }
  return parse_json(out, origin);
}

std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

const json& require(const json& obj, const char* key, std::string_view where) {
  if (!obj.is_object()) throw_validation(std::string(where) + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw_validation(std::string(where) + ": missing field '" + key + "'");
  return *it;
}

}  // namespace langsup::detail
