#include "wavreg/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "wavreg/errors.hpp"

namespace wavreg {

std::string format_cell(const CsvWriter::Cell& cell) {
    if (const auto* s = std::get_if<std::string>(&cell)) return *s;
    if (const auto* i = std::get_if<long long>(&cell)) return std::to_string(*i);
    const double v = std::get<double>(cell);
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& schema, std::vector<std::string> columns)
    : out_(path), columns_(columns.size()), path_(path) {
    if (!out_) throw InputError("cannot write '" + path.string() + "'");
    out_ << "# wavreg " << schema << " v" << kCsvSchemaVersion << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
}

void CsvWriter::row(const std::vector<Cell>& cells) {
    if (cells.size() != columns_)
        throw UsageError("CSV row for '" + path_.string() + "' has " + std::to_string(cells.size()) +
                         " cells, header has " + std::to_string(columns_));
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << format_cell(cells[i]);
    out_ << '\n';
    out_.flush();
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    CsvTable table;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::istringstream is(s);
        std::string cell;
        while (std::getline(is, cell, ',')) out.push_back(cell);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    if (!std::getline(in, line) || line.rfind("# wavreg ", 0) != 0)
        throw FormatError("'" + path.string() + "' lacks the wavreg schema line", 0);
    table.schema_line = line;
    if (std::getline(in, line)) table.header = split(line);
    while (std::getline(in, line))
        if (!line.empty()) table.rows.push_back(split(line));
    return table;
}

std::vector<unsigned char> encode_pgm(std::size_t width, std::size_t height, const std::vector<double>& values) {
    if (values.size() != width * height)
        throw DimensionError("PGM: " + std::to_string(values.size()) + " values for a " + std::to_string(width) + "x" +
                             std::to_string(height) + " image");
    const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = values.empty() ? 0.0 : *hi - *lo;
    for (double v : values) {
        const double t = range > 0.0 ? (v - *lo) / range : 0.0;
        out.push_back(static_cast<unsigned char>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0)));
    }
    return out;
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<double>& values) {
    const auto bytes = encode_pgm(width, height, values);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace wavreg
