#pragma once

// File helpers shared by every module: atomic writes, fixed-precision number
// formatting and a small CSV reader.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace thz {

/// Throws IoError when the file cannot be read.
std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`.
void write_text_atomic(const std::filesystem::path& path, std::string_view contents);

/// Nine significant digits, "%.9g".
std::string fmt_num(double v);

/// Value rounded to nine significant digits, for JSON output.
double sig9(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws ParseError when absent.
    std::size_t column(std::string_view name) const;
};

/// Comma-separated, first line is the header, no quoting.
CsvTable parse_csv(std::string_view text, std::string_view what);
CsvTable read_csv(const std::filesystem::path& path);

double parse_double(std::string_view s, std::string_view what);
long parse_int(std::string_view s, std::string_view what);

}  // namespace thz
