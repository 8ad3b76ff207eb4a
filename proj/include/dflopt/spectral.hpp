#pragma once

#include <cstdint>
#include <vector>

#include "dflopt/matrix.hpp"

// Simulated-distributed orthogonal iteration for the second-largest
// eigenvalue magnitude of an expected mixing matrix. Each device holds one
// scalar of the iterate and its own row of the matrix; one iteration is
//   v <- Wbar v   (neighbor message exchange)
//   v <- v - mean(v) * 1   (deflation of the all-ones direction)
//   v <- v / ||v||
// Mean and norm come from a global reduce (default) or from gossip rounds of
// the same neighbor exchange. An access audit records which peers each
// device read so locality can be asserted after the run.

namespace dflopt {

struct IterationConfig {
    std::size_t max_iterations = 10000; // K_max
    // Stop early when ||Wbar v - (v' Wbar v) v|| <= residual_tolerance;
    // 0 runs the full max_iterations.
    double residual_tolerance = 0.0;
    enum class Normalization { ExactReduce, Gossip };
    Normalization normalization = Normalization::ExactReduce;
    std::size_t gossip_rounds = 50; // per normalization when Gossip
};

// Which peer scalars each device read during a run. Convergence diagnostics
// (Rayleigh quotient / residual for stopping and reporting) are computed by
// the simulation observer and are not device reads; in exact-reduce mode the
// normalization itself uses the global-reduce channel, recorded by the flag.
struct AccessAudit {
    std::vector<std::vector<std::uint8_t>> reads; // reads[i][j] = 1: i read j's scalar
    bool used_global_reduce = false;
};

struct EigenResult {
    Vec eigenvector;        // unit norm, zero-sum, first nonzero component positive
    double rho_estimate = 0.0;   // |v' Wbar v|
    double rayleigh = 0.0;       // signed v' Wbar v (identifies which spectrum end won)
    std::size_t iterations_used = 0;
    double residual = 0.0;       // ||Wbar v - rayleigh * v||
    // Residual-based upper proxy for the squared distance between v and the
    // dominant restricted eigenspace (exact distance requires the dense
    // decomposition; see inexactness_check in weightopt).
    double epsilon_estimate = 0.0;
    bool degenerate = false;     // iterate vanished: restricted spectrum ~ 0
};

// Runs the iteration on Wbar (symmetric doubly stochastic). The starting
// vector draws one standard-normal scalar per device from `seed`. If `audit`
// is non-null, it is reset and filled.
EigenResult orthogonal_iteration(const Matrix& wbar, const IterationConfig& cfg,
                                 std::uint64_t seed, AccessAudit* audit = nullptr);

struct AuditSummary {
    std::vector<std::size_t> peers_read_per_device;
    bool used_global_reduce = false;
};

// Verifies the audit against the zero-weight structure of Wbar: device i may
// read scalars only from {j != i : wbar_ij != 0}. Throws a verification
// error on any out-of-neighborhood read; returns per-device read counts.
AuditSummary audit_report(const AccessAudit& audit, const Matrix& wbar);

} // namespace dflopt
