#pragma once

#include "rap/types.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rap::cli {

/// Numeric CSV table: mandatory header row, comma delimiter.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Position of a column, or -1.
    int column(std::string_view name) const;
};

/// Parses a numeric table. Malformed cells and non-finite values raise
/// DataError naming the 1-based data row and the column.
Table read_table(std::istream& in);
Table read_table_file(const std::string& path);

/// "%.9g"
std::string format_double(double v);

} // namespace rap::cli
