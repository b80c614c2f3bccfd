#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>

namespace rap::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    for (auto& cell : out) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cell = b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1);
    }
    return out;
}

} // namespace

int Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

Table read_table(std::istream& in) {
    Table t;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        t.header = split(line);
        break;
    }
    if (t.header.empty()) throw DataError("missing header row");
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i].empty()) throw DataError("empty column name at position " + std::to_string(i + 1));
        for (std::size_t j = 0; j < i; ++j) {
            if (t.header[j] == t.header[i]) throw DataError("duplicate column '" + t.header[i] + "'");
        }
    }
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        ++row;
        const auto cells = split(line);
        if (cells.size() != t.header.size()) {
            throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(t.header.size()) +
                            " fields, got " + std::to_string(cells.size()));
        }
        std::vector<double> values(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& s = cells[c];
            const char* first = s.data();
            const char* last = s.data() + s.size();
            if (first != last && *first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, last, values[c]);
            if (s.empty() || ec != std::errc{} || ptr != last) {
                throw DataError("row " + std::to_string(row) + ", column '" + t.header[c] +
                                "': not a number: '" + s + "'");
            }
            if (!std::isfinite(values[c])) {
                throw DataError("row " + std::to_string(row) + ", column '" + t.header[c] +
                                "': non-finite value");
            }
        }
        t.rows.push_back(std::move(values));
    }
    return t;
}

Table read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_table(in);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace rap::cli
