#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace relikit::io {

/// Input error pinned to a file position. Line and column are 1-based; zero
/// means not applicable.
class DataError : public std::runtime_error {
  public:
    DataError(const std::string& file, std::size_t line, std::size_t column, const std::string& message);

    const std::string& file() const { return file_; }
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

  private:
    std::string file_;
    std::size_t line_;
    std::size_t column_;
};

struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

/// RFC 4180 table with a mandatory header row.
struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<CsvRow> rows;

    /// Index of a header column; throws DataError naming the column when absent.
    std::size_t column(const std::string& name) const;
    bool has_column(const std::string& name) const;

    const std::string& cell(const CsvRow& row, std::size_t col) const;
    double number(const CsvRow& row, std::size_t col) const;
    long integer(const CsvRow& row, std::size_t col) const;
    /// Accepts 0/1 and true/false.
    bool boolean(const CsvRow& row, std::size_t col) const;
};

CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");
CsvTable read_csv(const std::string& path);

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows);

/// Shortest decimal string that reads back to the same double.
std::string format_double(double x);

}  // namespace relikit::io
