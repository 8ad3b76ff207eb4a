#include "dflopt/matrix.hpp"

#include <cmath>
#include <cstdlib>

#include "dflopt/errors.hpp"
#include "dflopt/kernels.hpp"

namespace dflopt {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::constant(std::size_t rows, std::size_t cols, double value) {
    return Matrix(rows, cols, value);
}

namespace {
void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw runtime_error(std::string("shape mismatch in ") + what);
}
} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw runtime_error("shape mismatch in matmul");
    Matrix c(a.rows(), b.cols());
    kern::ops().gemm(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

Vec matvec(const Matrix& a, const Vec& x) {
    if (a.cols() != x.size()) throw runtime_error("shape mismatch in matvec");
    Vec y(a.rows());
    kern::ops().matvec(a.data(), a.rows(), a.cols(), x.data(), y.data());
    return y;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c(a.rows(), a.cols());
    kern::ops().hadamard(a.data(), b.data(), c.data(), a.rows() * a.cols());
    return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator+");
    Matrix c(a.rows(), a.cols());
    const std::size_t n = a.rows() * a.cols();
    for (std::size_t i = 0; i < n; ++i) c.data()[i] = a.data()[i] + b.data()[i];
    return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator-");
    Matrix c(a.rows(), a.cols());
    const std::size_t n = a.rows() * a.cols();
    for (std::size_t i = 0; i < n; ++i) c.data()[i] = a.data()[i] - b.data()[i];
    return c;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix c = a;
    kern::ops().scal(s, c.data(), c.rows() * c.cols());
    return c;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    const std::size_t n = a.rows() * a.cols();
    for (std::size_t i = 0; i < n; ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

double frobenius_norm(const Matrix& a) {
    return std::sqrt(kern::ops().nrm2sq(a.data(), a.rows() * a.cols()));
}

bool is_symmetric(const Matrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::fabs(a(i, j) - a(j, i)) > tol) return false;
    return true;
}

Vec row_sums(const Matrix& a) {
    Vec s(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        s[i] = kern::ops().sum(a.row(i), a.cols());
    return s;
}

Vec col_sums(const Matrix& a) {
    Vec s(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        kern::ops().axpy(1.0, a.row(i), s.data(), a.cols());
    return s;
}

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw runtime_error("size mismatch in dot");
    return kern::ops().dot(a.data(), b.data(), a.size());
}

double norm2(const Vec& a) { return std::sqrt(kern::ops().nrm2sq(a.data(), a.size())); }

double sum(const Vec& a) { return kern::ops().sum(a.data(), a.size()); }

void axpy(double alpha, const Vec& x, Vec& y) {
    if (x.size() != y.size()) throw runtime_error("size mismatch in axpy");
    kern::ops().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, Vec& x) { kern::ops().scal(alpha, x.data(), x.size()); }

double max_abs_diff(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw runtime_error("size mismatch in max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

} // namespace dflopt
