#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

namespace langsup::detail {

using json = nlohmann::json;

// Parses JSON, turning parse errors into validation errors that carry
// origin:line:column.
json parse_json(std::string_view text, std::string_view origin);

// Like parse_json, but first rewrites bare NaN / Infinity / -Infinity tokens
// (outside strings) into the strings "NaN" / "Infinity" / "-Infinity" so
// callers can report them as non-finite values.
json parse_json_relaxed(std::string_view text, std::string_view origin);

// Sorted keys, two-space indent, trailing newline.
std::string canonical_dump(const json& j);

const json& require(const json& obj, const char* key, std::string_view where);

}  // namespace langsup::detail
