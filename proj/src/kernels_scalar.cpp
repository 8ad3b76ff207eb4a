#include "dflopt/kernels.hpp"

// Reference kernels: straightforward loops, no manual vectorization. These
// define the semantics the SIMD variants must reproduce (up to floating-point
// reassociation).

namespace dflopt::kern {
namespace {

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double s_nrm2sq(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

double s_sum(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_scal(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void s_matvec(const double* a, std::size_t m, std::size_t n,
              const double* x, double* y) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = a + i * n;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

void s_gemm(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
    // i-k-j order keeps the inner loop contiguous over B and C rows.
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
        for (std::size_t l = 0; l < k; ++l) {
            double aval = a[i * k + l];
            const double* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
        }
    }
}

void s_hadamard(const double* a, const double* b, double* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

double s_gather_dot(const double* vals, const std::int32_t* idx,
                    std::size_t n, const double* v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += vals[i] * v[idx[i]];
    return acc;
}

} // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        s_dot, s_nrm2sq, s_sum, s_axpy, s_scal,
        s_matvec, s_gemm, s_hadamard, s_gather_dot, "scalar",
    };
    return ops;
}

} // namespace dflopt::kern
