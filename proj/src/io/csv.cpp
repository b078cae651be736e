#include "relikit/io/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace relikit::io {

namespace {

std::string position(const std::string& file, std::size_t line, std::size_t column)
{
    std::string s = file;
    if (line > 0) s += ":" + std::to_string(line);
    if (column > 0) s += ":" + std::to_string(column);
    return s;
}

bool needs_quotes(const std::string& s)
{
    return s.find_first_of(",\"\r\n") != std::string::npos || (!s.empty() && (s.front() == ' ' || s.back() == ' '));
}

}  // namespace

DataError::DataError(const std::string& file, std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error(position(file, line, column) + ": " + message), file_(file), line_(line), column_(column)
{
}

std::size_t CsvTable::column(const std::string& name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw DataError(source, 1, 0, "missing column '" + name + "'");
}

bool CsvTable::has_column(const std::string& name) const
{
    for (const auto& h : header)
        if (h == name) return true;
    return false;
}

const std::string& CsvTable::cell(const CsvRow& row, std::size_t col) const
{
    if (col >= row.fields.size())
        throw DataError(source, row.line, col + 1, "row has " + std::to_string(row.fields.size()) + " fields");
    return row.fields[col];
}

double CsvTable::number(const CsvRow& row, std::size_t col) const
{
    const std::string& s = cell(row, col);
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v))
        throw DataError(source, row.line, col + 1, "'" + header[col] + "' is not a finite number: \"" + s + "\"");
    return v;
}

long CsvTable::integer(const CsvRow& row, std::size_t col) const
{
    const std::string& s = cell(row, col);
    long v = 0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end)
        throw DataError(source, row.line, col + 1, "'" + header[col] + "' is not an integer: \"" + s + "\"");
    return v;
}

bool CsvTable::boolean(const CsvRow& row, std::size_t col) const
{
    const std::string& s = cell(row, col);
    if (s == "1" || s == "true" || s == "TRUE" || s == "True") return true;
    if (s == "0" || s == "false" || s == "FALSE" || s == "False") return false;
    throw DataError(source, row.line, col + 1, "'" + header[col] + "' must be 0 or 1, got \"" + s + "\"");
}

CsvTable parse_csv(const std::string& text, const std::string& source)
{
    CsvTable table;
    table.source = source;
    std::vector<std::vector<std::string>> records;
    std::vector<std::size_t> lines;

    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false, field_started = false, quoted_field = false;
    std::size_t line = 1, record_line = 1;
    auto end_field = [&] {
        fields.push_back(field);
        field.clear();
        field_started = false;
        quoted_field = false;
    };
    auto end_record = [&] {
        end_field();
        const bool blank = fields.size() == 1 && fields[0].empty();
        if (!blank) {
            records.push_back(std::move(fields));
            lines.push_back(record_line);
        }
        fields.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        if (c == '"') {
            if (field_started || quoted_field)
                throw DataError(source, line, fields.size() + 1, "unexpected quote inside unquoted field");
            in_quotes = true;
            quoted_field = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_record();
            ++line;
            record_line = line;
        } else {
            if (quoted_field) throw DataError(source, line, fields.size() + 1, "text after closing quote");
            field += c;
            field_started = true;
        }
    }
    if (in_quotes) throw DataError(source, line, fields.size() + 1, "unterminated quoted field");
    if (field_started || quoted_field || !fields.empty()) end_record();

    if (records.empty()) throw DataError(source, 0, 0, "no records");
    table.header = std::move(records.front());
    for (auto& h : table.header) {
        if (h.size() >= 3 && static_cast<unsigned char>(h[0]) == 0xEF) h.erase(0, 3);  // UTF-8 BOM
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size())
            throw DataError(source, lines[r], 0,
                            "expected " + std::to_string(table.header.size()) + " fields, found " +
                                std::to_string(records[r].size()));
        table.rows.push_back({lines[r], std::move(records[r])});
    }
    if (table.rows.empty()) throw DataError(source, 0, 0, "no records");
    return table;
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path, 0, 0, "cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path);
}

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows)
{
    auto write_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out << ',';
            if (needs_quotes(row[i])) {
                out << '"';
                for (char c : row[i]) {
                    if (c == '"') out << '"';
                    out << c;
                }
                out << '"';
            } else {
                out << row[i];
            }
        }
        out << "\r\n";
    };
    write_row(header);
    for (const auto& r : rows) write_row(r);
}

void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path, 0, 0, "cannot write file");
    write_csv(out, header, rows);
}

std::string format_double(double x)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace relikit::io
