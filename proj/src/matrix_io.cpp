#include "ecl/matrix_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ecl/errors.hpp"

namespace ecl {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string matrix_to_csv(const AccuracyMatrix& a) {
    std::size_t width = 0;
    for (const auto& row : a.rows) width = std::max(width, row.size());
    std::ostringstream out;
    out << "# accuracy matrix: row t, column u = accuracy on task u after training stage t\n";
    for (const auto& row : a.rows) {
        for (std::size_t u = 0; u < width; ++u) {
            if (u) out << ',';
            if (u < row.size()) out << format_double(row[u]);
        }
        out << '\n';
    }
    return out.str();
}

AccuracyMatrix matrix_from_csv_text(const std::string& text, const std::string& origin) {
    AccuracyMatrix a;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        std::vector<double> row;
        bool in_padding = false;
        std::size_t pos = 0;
        std::size_t cells = 0;
        while (true) {
            std::size_t comma = line.find(',', pos);
            std::string cell = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            ++cells;
            if (cell.empty()) {
                in_padding = true;
            } else {
                if (in_padding)
                    throw FormatError(origin + " row " + std::to_string(line_no) +
                                      ": value after an empty cell");
                double v = 0.0;
                auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
                    throw FormatError(origin + " row " + std::to_string(line_no) +
                                      ": cannot parse \"" + cell + "\" as a number");
                row.push_back(v);
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (row.empty())
            throw FormatError(origin + " row " + std::to_string(line_no) + ": no values");
        if (width == 0) {
            width = cells;
        } else if (cells != width) {
            throw FormatError(origin + " row " + std::to_string(line_no) + ": expected " +
                              std::to_string(width) + " cells, found " + std::to_string(cells));
        }
        a.rows.push_back(std::move(row));
    }
    if (a.rows.empty()) throw FormatError(origin + ": no data rows");
    return a;
}

AccuracyMatrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return matrix_from_csv_text(buf.str(), path);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw FormatError("failed writing " + path);
}

}  // namespace ecl
