#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ctquant/error.hpp"

namespace ctquant {

namespace fs = std::filesystem;

/// Six significant digits, `%g` style. Every float in every table goes
/// through here so identical inputs give identical bytes.
[[nodiscard]] inline std::string format_number(double v) {
    if (v == 0.0) return "0";  // folds -0
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

[[nodiscard]] inline std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a sibling temp file and renames, so readers never observe a
/// half-written artifact.
inline void write_file_atomic(const fs::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorCode::io, "short write to " + path.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::io, "cannot move " + tmp.string() + " into place: " + ec.message());
}

/// Minimal CSV field split; the tables written here never quote.
[[nodiscard]] inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

/// Header plus rows of raw string cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::ptrdiff_t column(std::string_view name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : std::distance(header.begin(), it);
    }
};

[[nodiscard]] inline CsvTable read_csv(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (first) {
            table.header = std::move(cells);
            first = false;
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw Error(ErrorCode::validation, path.string() + ": row has " + std::to_string(cells.size()) +
                                                   " cells, header has " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    if (first) throw Error(ErrorCode::validation, path.string() + ": missing CSV header");
    return table;
}

[[nodiscard]] inline std::string join_csv(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    line += '\n';
    return line;
}

}  // namespace ctquant
