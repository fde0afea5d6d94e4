#pragma once

#include <optional>
#include <string>
#include <vector>

namespace calmreg {

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

std::string csv_escape(const std::string& field);

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
    void add_row(std::vector<std::string> row);
    // RFC-4180 text with LF line endings.
    std::string str() const;
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // −1 if absent
};

CsvData parse_csv(const std::string& text);
CsvData read_csv_file(const std::string& path);

// Writes text to path, or to stdout when path is empty or "-".
void write_text(const std::string& path, const std::string& text);

}  // namespace calmreg
