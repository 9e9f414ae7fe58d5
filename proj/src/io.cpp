#include "thz/io.hpp"

#include <cerrno>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "thz/error.hpp"

namespace thz {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, std::string_view contents) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::string fmt_num(double v) {
    char buf[32];
    if (v == 0.0) v = 0.0;  // drop the sign of negative zero
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

double sig9(double v) { return std::strtod(fmt_num(v).c_str(), nullptr); }

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ParseError("csv: missing column '" + std::string(name) + "'");
}

namespace {
std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.remove_suffix(1);
        while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
        out.emplace_back(cell);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}
}  // namespace

CsvTable parse_csv(std::string_view text, std::string_view what) {
    CsvTable t;
    std::size_t pos = 0;
    bool first = true;
    std::size_t lineno = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++lineno;
        if (line.empty() || line == "\r" || line.front() == '#') continue;
        auto cells = split_line(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size()) {
                throw ParseError(std::string(what) + ": line " + std::to_string(lineno) + " has " +
                                 std::to_string(cells.size()) + " fields, expected " +
                                 std::to_string(t.header.size()));
            }
            t.rows.push_back(std::move(cells));
        }
    }
    if (first) throw ParseError(std::string(what) + ": empty csv");
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    return parse_csv(read_text_file(path), path.string());
}

double parse_double(std::string_view s, std::string_view what) {
    // from_chars for double is available in libstdc++ 11
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        if (s == "inf") return HUGE_VAL;
        if (s == "-inf") return -HUGE_VAL;
        throw ParseError(std::string(what) + ": not a number: '" + std::string(s) + "'");
    }
    return v;
}

long parse_int(std::string_view s, std::string_view what) {
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw ParseError(std::string(what) + ": not an integer: '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace thz
