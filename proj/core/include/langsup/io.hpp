#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace langsup {

// Reads a whole file; throws a validation error naming the path when the
// file is missing or unreadable.
std::string read_text_file(const std::filesystem::path& path);

// Writes through a sibling temporary file and renames it into place, so
// readers never observe a partial file. Throws a validation error on I/O
// failure.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);

// Decimal with 9 significant digits ("%.9g"), the CSV number format.
std::string format_g9(double value);

// UTC "YYYY-MM-DDTHH:MM:SSZ".
std::string iso8601_now();

}  // namespace langsup
