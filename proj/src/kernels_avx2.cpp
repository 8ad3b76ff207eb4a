#include "dflopt/kernels.hpp"

// AVX2+FMA variants. Compiled with -mavx2 -mfma on x86-64; the dispatcher
// only hands these out after a runtime CPU check. Results may differ from
// the scalar kernels by reassociation/FMA rounding only.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace dflopt::kern {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double v_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double v_nrm2sq(const double* a, std::size_t n) { return v_dot(a, a, n); }

double v_sum(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i];
    return s;
}

void v_axpy(double alpha, const double* x, double* y, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void v_scal(double alpha, double* x, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

void v_matvec(const double* a, std::size_t m, std::size_t n,
              const double* x, double* y) {
    for (std::size_t i = 0; i < m; ++i) y[i] = v_dot(a + i * n, x, n);
}

void v_gemm(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) _mm256_storeu_pd(crow + j, _mm256_setzero_pd());
        for (; j < n; ++j) crow[j] = 0.0;
        for (std::size_t l = 0; l < k; ++l) {
            __m256d aval = _mm256_set1_pd(a[i * k + l]);
            const double* brow = b + l * n;
            j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d vc = _mm256_loadu_pd(crow + j);
                vc = _mm256_fmadd_pd(aval, _mm256_loadu_pd(brow + j), vc);
                _mm256_storeu_pd(crow + j, vc);
            }
            double as = a[i * k + l];
            for (; j < n; ++j) crow[j] += as * brow[j];
        }
    }
}

void v_hadamard(const double* a, const double* b, double* c, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(c + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                              _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) c[i] = a[i] * b[i];
}

double v_gather_dot(const double* vals, const std::int32_t* idx,
                    std::size_t n, const double* v) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
        __m256d vv = _mm256_i32gather_pd(v, vi, 8);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(vals + i), vv, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += vals[i] * v[idx[i]];
    return s;
}

} // namespace

const Ops& avx2_ops() {
    static const Ops ops = {
        v_dot, v_nrm2sq, v_sum, v_axpy, v_scal,
        v_matvec, v_gemm, v_hadamard, v_gather_dot, "avx2",
    };
    return ops;
}

} // namespace dflopt::kern

#endif // x86-64
