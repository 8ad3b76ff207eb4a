#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Dense inner-loop kernels. Scalar reference implementations always exist;
// on x86-64 an AVX2+FMA variant of each is compiled in and selected at
// runtime when the CPU supports it. The two variants are equivalence-tested
// against each other, and either can be forced (for tests or debugging) via
// force_backend() or the DFLOPT_KERNELS environment variable
// ("scalar"/"avx2").

namespace dflopt::kern {

struct Ops {
    // Reductions over contiguous arrays.
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*nrm2sq)(const double* a, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // x *= alpha
    void (*scal)(double alpha, double* x, std::size_t n);
    // y = A x, A row-major m x n
    void (*matvec)(const double* a, std::size_t m, std::size_t n,
                   const double* x, double* y);
    // C = A B, row-major, A m x k, B k x n
    void (*gemm)(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n);
    // c = a .* b elementwise
    void (*hadamard)(const double* a, const double* b, double* c, std::size_t n);
    // sum_k vals[k] * v[idx[k]] (sparse row dot against a dense vector)
    double (*gather_dot)(const double* vals, const std::int32_t* idx,
                         std::size_t n, const double* v);
    const char* name;
};

const Ops& scalar_ops();
bool avx2_available();
const Ops& avx2_ops(); // valid to call only when avx2_available()

// Active backend (picked once at startup: env override, else best available).
const Ops& ops();

// Force a specific backend; "" restores the automatic choice. Throws on an
// unknown name or if the requested backend is unsupported on this machine.
void force_backend(const std::string& name);

} // namespace dflopt::kern
