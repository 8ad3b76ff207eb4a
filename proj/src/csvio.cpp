#include "dflopt/csvio.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dflopt/errors.hpp"

namespace dflopt::csvio {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_int(long long v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", v);
    return buf;
}

void write_matrix(const std::string& path, const Matrix& m) {
    std::ostringstream out;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        if (j) out << ',';
        out << 'c' << j;
    }
    out << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << fmt_double(m(i, j));
        }
        out << '\n';
    }
    write_file(path, out.str());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    cells.push_back(cur);
    return cells;
}

bool looks_numeric(const std::string& s) {
    for (char ch : s) {
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' ||
            ch == '+' || ch == 'e' || ch == 'E' || ch == ' ' || ch == '\t')
            continue;
        // "nan"/"inf" never appear in valid files; treat them as non-numeric.
        return false;
    }
    return !s.empty();
}

} // namespace

Matrix read_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open matrix CSV: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (first) {
            first = false;
            if (!cells.empty() && !looks_numeric(cells[0])) continue; // header
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            try {
                std::size_t used = 0;
                double v = std::stod(c, &used);
                row.push_back(v);
            } catch (const std::exception&) {
                throw config_error("bad numeric cell '" + c + "' in " + path);
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw config_error("empty matrix CSV: " + path);
    const std::size_t cols = rows[0].size();
    for (const auto& r : rows)
        if (r.size() != cols) throw config_error("ragged matrix CSV: " + path);
    Matrix m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
    return m;
}

void Table::add_row(std::vector<std::string> cells) {
    if (cells.size() != columns_.size())
        throw runtime_error("CSV row width does not match header");
    rows_.push_back(std::move(cells));
}

void Table::write(const std::string& path) const {
    std::ostringstream out;
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        if (j) out << ',';
        out << columns_[j];
    }
    out << '\n';
    for (const auto& row : rows_) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out << ',';
            out << row[j];
        }
        out << '\n';
    }
    write_file(path, out.str());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw runtime_error("write failed: " + path);
}

} // namespace dflopt::csvio
