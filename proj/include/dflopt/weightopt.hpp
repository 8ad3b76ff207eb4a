#pragma once

#include <cstdint>
#include <vector>

#include "dflopt/matrix.hpp"
#include "dflopt/spectral.hpp"

// Aggregation-weight optimization: minimize the second-largest eigenvalue
// magnitude of the expected mixing matrix over symmetric doubly stochastic
// weights, by projected subgradient steps. The eigenvector driving each step
// comes either from the simulated-distributed iteration (distributed mode)
// or from the dense decomposition (centralized reference mode); the reported
// objective trace always uses the dense oracle.

namespace dflopt {

// Which end of the restricted spectrum attains the objective: the
// second-largest eigenvalue, or the negated smallest.
enum class SubgradientBranch { Lambda2, MinusLambdaM };

// g_ij = -p_ij (v_i - v_j)^2 on the Lambda2 branch, +p_ij (v_i - v_j)^2 on
// the MinusLambdaM branch; zero diagonal. One entry per ordered pair; each
// unordered pair {i,j} is a single optimization variable whose step uses
// g_ij once.
Matrix subgradient(const Matrix& p, const Vec& v, SubgradientBranch branch);

struct ProjectionResult {
    Vec q;             // projected tail, entrywise >= 0, sum <= budget
    double nu = 0.0;   // KKT multiplier of the sum constraint
    double budget = 0.0;
};

// Euclidean projection of w_tail onto {q >= 0, sum(q) <= budget}: exact
// sort-based thresholding of the KKT conditions (bisection fallback).
// Throws on a negative budget (empty feasible set).
ProjectionResult project_tail(const Vec& w_tail, double budget);

struct SequentialProjectionStats {
    std::size_t repaired_rows = 0; // rows whose diagonal needed rescue
};

// Sequential per-device projection onto symmetric doubly stochastic
// matrices: row i keeps the already-projected entries w_ij (j < i) fixed,
// projects its tail with budget 1 - sum_{j<i} w_ij, and completes the
// diagonal. Rows driven infeasible (negative diagonal) are rescaled and the
// pass re-run once; failure to restore feasibility within 1e-9 is an error.
Matrix project_weights(const Matrix& w_raw, SequentialProjectionStats* stats = nullptr);

struct InexactnessDiagnostics {
    double epsilon = 0.0;       // ||v_approx - v_exact||^2
    double deviation_sq = 0.0;  // ||g(v_approx) - g(v_exact)||_F^2
    double deviation_bound = 0.0; // 32 * epsilon * sum_{i != j} p_ij^2
    double ratio = 0.0;         // deviation_sq / deviation_bound (0 when bound is 0)
    double step_energy = 0.0;   // eta_n = 0.5 * gamma_n * ||g||_F^2 (filled by optimizer)
    double delta = 0.0;         // eta_n + deviation_sq (filled by optimizer)
};

// Deviation between the subgradients induced by an approximate and an exact
// eigenvector, checked against the closed-form bound. Throws a verification
// error if the bound is violated.
InexactnessDiagnostics inexactness_check(const Matrix& p, const Vec& v_approx,
                                         const Vec& v_exact);

struct OptimizerConfig {
    enum class StepSchedule { Constant, Harmonic };
    StepSchedule schedule = StepSchedule::Constant;
    // Constant: gamma_n = step_size. Harmonic: gamma_n = step_size / n.
    double step_size = 0.01;
    std::size_t outer_iterations = 10000; // J_max
    IterationConfig inner;                // distributed eigensolver settings
    Matrix initial_weights;               // empty: uniform 1/M design
    bool collect_diagnostics = false;     // per-iteration inexactness records
    std::uint64_t seed = 0;               // drives eigensolver starting vectors
};

enum class OptimizeMode { Distributed, Centralized };

struct OptimizeResult {
    Matrix weights;               // best iterate encountered
    std::vector<double> rho_trace; // dense-oracle objective; [0] is the initial design
    std::vector<double> step_sizes; // gamma_n per iteration (size J_max)
    std::vector<InexactnessDiagnostics> diagnostics; // per iteration when enabled
    std::vector<std::size_t> repair_trace; // projection repairs per iteration
    double initial_rho = 0.0;
    double best_rho = 0.0;
    std::size_t best_iteration = 0; // index into rho_trace
    std::size_t repair_count = 0;   // total projection repairs across iterations
};

OptimizeResult optimize_weights(const Matrix& p, const OptimizerConfig& cfg,
                                OptimizeMode mode);

} // namespace dflopt
