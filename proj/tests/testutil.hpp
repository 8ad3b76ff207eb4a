#pragma once

#include <cstdint>

#include "dflopt/kernels.hpp"
#include "dflopt/matrix.hpp"
#include "dflopt/rng.hpp"

// Shared helpers for the unit tests.

namespace testutil {

inline dflopt::Vec random_vec(std::size_t n, std::uint64_t key, double lo = -1.0,
                              double hi = 1.0) {
    dflopt::rng::Stream s(key);
    dflopt::Vec v(n);
    for (auto& x : v) x = lo + (hi - lo) * s.next_u01();
    return v;
}

inline dflopt::Matrix random_matrix(std::size_t rows, std::size_t cols,
                                    std::uint64_t key, double lo = -1.0,
                                    double hi = 1.0) {
    dflopt::rng::Stream s(key);
    dflopt::Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = lo + (hi - lo) * s.next_u01();
    return m;
}

// A random symmetric matrix with zero diagonal and entries in [lo, hi].
inline dflopt::Matrix random_symmetric_hollow(std::size_t n, std::uint64_t key,
                                              double lo = 0.0, double hi = 1.0) {
    dflopt::rng::Stream s(key);
    dflopt::Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = lo + (hi - lo) * s.next_u01();
            m(i, j) = v;
            m(j, i) = v;
        }
    return m;
}

// A random feasible aggregation-weight matrix: off-diagonal entries drawn in
// [0, 1/M) so every row's off-diagonal sum stays below 1 and the completed
// diagonal is strictly positive.
inline dflopt::Matrix random_weights(std::size_t m, std::uint64_t key) {
    dflopt::rng::Stream s(key);
    dflopt::Matrix w(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double v = s.next_u01() / static_cast<double>(m);
            w(i, j) = v;
            w(j, i) = v;
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        double off = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            if (j != i) off += w(i, j);
        w(i, i) = 1.0 - off;
    }
    return w;
}

// Forces both kernel backends through `fn` when AVX2 hardware is present;
// otherwise runs the scalar backend only. Restores the default afterwards.
template <typename Fn>
void with_each_backend(Fn&& fn) {
    namespace kern = dflopt::kern;
    kern::force_backend("scalar");
    fn("scalar");
    if (kern::avx2_available()) {
        kern::force_backend("avx2");
        fn("avx2");
    }
    kern::force_backend("");
}

} // namespace testutil
