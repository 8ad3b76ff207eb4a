#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dflopt/matrix.hpp"

// CSV persistence. All floating-point values are written with %.17g so that
// a written value re-reads to the identical double and reruns of the same
// experiment produce byte-identical files.

namespace dflopt::csvio {

std::string fmt_double(double v);
std::string fmt_int(long long v);

// Matrix files: one header row (c0,...,c{N-1}) then one CSV row per matrix row.
void write_matrix(const std::string& path, const Matrix& m);
Matrix read_matrix(const std::string& path);

// Generic tables: header + rows of preformatted cells.
class Table {
public:
    explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}
    void add_row(std::vector<std::string> cells);
    void write(const std::string& path) const;
    const std::vector<std::string>& columns() const { return columns_; }
    std::size_t row_count() const { return rows_.size(); }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

} // namespace dflopt::csvio
