#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hazardtm::csv {

// Minimal RFC 4180 reader/writer: comma separated, double-quote escaping.

struct Row {
    std::size_t line = 0;  // 1-based line number in the source
    std::vector<std::string> fields;
};

std::vector<Row> read(std::istream& in);
std::vector<Row> read_file(const std::string& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace hazardtm::csv
