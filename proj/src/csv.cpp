#include "hazardtm/csv.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "hazardtm/error.hpp"

namespace hazardtm::csv {

std::vector<Row> read(std::istream& in) {
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Row row;
        row.line = line_no;
        std::string field;
        bool quoted = false;
        std::size_t i = 0;
        while (true) {
            if (i >= line.size()) {
                if (quoted) {
                    // Quoted field spanning lines.
                    std::string next;
                    if (!std::getline(in, next)) {
                        throw Error(ErrorCode::ParseError, "unterminated quote at line " + std::to_string(row.line));
                    }
                    ++line_no;
                    if (!next.empty() && next.back() == '\r') next.pop_back();
                    field.push_back('\n');
                    line = std::move(next);
                    i = 0;
                    continue;
                }
                break;
            }
            const char c = line[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        field.push_back('"');
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    field.push_back(c);
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                row.fields.push_back(std::move(field));
                field.clear();
            } else {
                field.push_back(c);
            }
            ++i;
        }
        row.fields.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<Row> read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    return read(in);
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out << ',';
        out << escape(fields[i]);
    }
    out << '\n';
}

}  // namespace hazardtm::csv
