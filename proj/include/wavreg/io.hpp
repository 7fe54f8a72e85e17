#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

namespace wavreg {

inline constexpr int kCsvSchemaVersion = 1;

// CSV with a leading "# wavreg <schema> v<version>" comment line and a header
// row. Doubles are written with 9 significant digits so reruns compare equal.
class CsvWriter {
public:
    using Cell = std::variant<std::string, double, long long>;

    CsvWriter(const std::filesystem::path& path, const std::string& schema, std::vector<std::string> columns);
    void row(const std::vector<Cell>& cells);

private:
    std::ofstream out_;
    std::size_t columns_;
    std::filesystem::path path_;
};

std::string format_cell(const CsvWriter::Cell& cell);

struct CsvTable {
    std::string schema_line;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
// Reads back a file written by CsvWriter (no quoting support).
CsvTable read_csv(const std::filesystem::path& path);

// Binary 8-bit greyscale PGM (P5); values are min-max scaled to 0..255, a
// constant image maps to 0.
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<double>& values);
std::vector<unsigned char> encode_pgm(std::size_t width, std::size_t height, const std::vector<double>& values);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace wavreg
