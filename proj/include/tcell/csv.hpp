#pragma once

#include <algorithm>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tcell/errors.hpp"
#include "tcell/numfmt.hpp"

namespace tcell {

inline std::vector<std::string> split_fields(std::string_view line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string join_fields(const std::vector<std::string>& fields, char sep = ',') {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out.push_back(sep);
        out += fields[i];
    }
    return out;
}

/// Field values never contain separators or line breaks; free-text cells
/// (error markers) are passed through here before writing.
inline std::string sanitize_csv_field(std::string_view text) {
    std::string out(text);
    std::replace(out.begin(), out.end(), ',', ';');
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return out;
}

/// CSV document with '#'-prefixed comment lines kept verbatim.
struct CsvFile {
    std::vector<std::string> comments;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column_index(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        return std::nullopt;
    }
};

inline CsvFile read_csv(std::istream& in) {
    CsvFile out;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line.front() == '#') {
            out.comments.push_back(line);
            continue;
        }
        if (line.empty()) continue;
        if (!header_seen) {
            out.columns = split_fields(line);
            header_seen = true;
        } else {
            out.rows.push_back(split_fields(line));
        }
    }
    return out;
}

} // namespace tcell
