// Delimited numeric tables (CSV/TSV) with optional header row and row ids,
// as produced by spreadsheet exports of expression or coordinate data.
#pragma once

#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emtk/numerics.hpp"
#include "emtk/seqio.hpp"

namespace emtk {

struct NumericTable {
    std::vector<std::string> column_names;  // empty when the file has no header
    std::vector<std::string> row_ids;       // empty when rows are unlabeled
    Matrix values;
};

namespace detail {

inline bool parse_double_field(const std::string& field, double& out) {
    if (field.empty()) return false;
    char* end = nullptr;
    out = std::strtod(field.c_str(), &end);
    return end == field.c_str() + field.size();
}

}  // namespace detail

// Delimiter is taken from the first non-blank line: tab when present,
// otherwise comma. A header row and a leading id column are detected by
// non-numeric content.
inline NumericTable parse_numeric_table(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    char sep = 0;
    while (std::getline(in, line)) {
        detail::strip_cr(line);
        if (line.empty()) continue;
        if (sep == 0) sep = line.find('\t') != std::string::npos ? '\t' : ',';
        rows.push_back(detail::split_fields(line, sep));
    }
    if (rows.empty()) throw ParseError("numeric table: no data", 1);

    auto numeric = [](const std::string& f) {
        double ignored;
        return detail::parse_double_field(f, ignored);
    };
    bool has_header = false;
    for (const auto& f : rows.front())
        if (!f.empty() && !numeric(f)) has_header = true;
    const std::size_t first_data = has_header ? 1 : 0;
    if (first_data >= rows.size())
        throw ParseError("numeric table: header but no data rows", 1);

    bool has_ids = false;
    for (std::size_t r = first_data; r < rows.size(); ++r)
        if (!numeric(rows[r].front())) has_ids = true;

    const std::size_t skip = has_ids ? 1 : 0;
    if (rows[first_data].size() <= skip)
        throw ParseError("numeric table: no numeric columns", first_data + 1);
    const std::size_t width = rows[first_data].size() - skip;

    NumericTable out;
    if (has_header) {
        // a header over an id column may carry a label for it; drop that cell
        const auto& h = rows.front();
        const std::size_t extra = h.size() >= width ? h.size() - width : 2;
        if (extra > 1)
            throw ParseError("numeric table: header has " + std::to_string(h.size()) +
                                 " fields for " + std::to_string(width) + " columns",
                             1);
        out.column_names.assign(h.begin() + static_cast<std::ptrdiff_t>(extra), h.end());
    }
    out.values = Matrix(rows.size() - first_data, width);
    for (std::size_t r = first_data; r < rows.size(); ++r) {
        const auto& fields = rows[r];
        const std::size_t line_no = r + 1;
        if (fields.size() != width + skip)
            throw ParseError("numeric table: expected " + std::to_string(width + skip) +
                                 " fields, found " + std::to_string(fields.size()),
                             line_no);
        if (has_ids) out.row_ids.push_back(fields.front());
        for (std::size_t c = 0; c < width; ++c) {
            double v;
            if (!detail::parse_double_field(fields[c + skip], v))
                throw ParseError("numeric table: field '" + fields[c + skip] +
                                     "' is not a number",
                                 line_no, c + skip + 1);
            out.values(r - first_data, c) = v;
        }
    }
    return out;
}

inline NumericTable parse_numeric_table(const std::string& text) {
    std::istringstream in(text);
    return parse_numeric_table(in);
}

inline void write_numeric_table(const NumericTable& table, std::ostream& out, char sep = ',') {
    if (!table.column_names.empty()) {
        if (!table.row_ids.empty()) out << "id" << sep;
        for (std::size_t c = 0; c < table.column_names.size(); ++c)
            out << (c ? std::string(1, sep) : "") << table.column_names[c];
        out << "\n";
    }
    out.precision(17);
    for (std::size_t r = 0; r < table.values.rows(); ++r) {
        if (!table.row_ids.empty()) out << table.row_ids[r] << sep;
        for (std::size_t c = 0; c < table.values.cols(); ++c)
            out << (c ? std::string(1, sep) : "") << table.values(r, c);
        out << "\n";
    }
}

}  // namespace emtk
