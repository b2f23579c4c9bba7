#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sprout {

using CsvRow = std::vector<std::string>;

/// RFC 4180 quoting: fields containing a comma, quote or newline are quoted.
std::string csv_escape(std::string_view field);
std::string csv_line(const CsvRow& row);
/// Parses CSV text; quoted fields may contain commas, quotes and newlines.
std::vector<CsvRow> parse_csv(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace sprout
