#pragma once

#include <cstddef>

#include "dflopt/matrix.hpp"

// Aggregation-weight matrices and their mixing statistics: the realized
// per-round mixing matrix built from a transmission mask, the closed-form
// expectation and second moment over link outcomes, dense spectral summaries,
// and the benchmark weight designs.

namespace dflopt {

// Entrywise expectation W-bar of the realized mixing matrix and the
// closed-form decomposition E[Whut^2] = W-bar^2 + V where V collects the
// link-variance contribution.
struct MixingMoments {
    Matrix first_moment;   // W-bar
    Matrix second_moment;  // E[Whut^2]
    Matrix variance_part;  // V = E[Whut^2] - W-bar^2
};

// Second-largest eigenvalue magnitude of a symmetric doubly stochastic
// matrix, with the eigenvalues attaining it and a unit eigenvector
// orthogonal to the all-ones direction.
struct SpectralSummary {
    double rho = 0.0;        // max(lambda_2, -lambda_min), clamped at 0
    double lambda2 = 0.0;    // second-largest eigenvalue
    double lambda_min = 0.0; // smallest eigenvalue
    Vec eigenvector;         // unit norm, orthogonal to all-ones, sign-fixed
    bool contraction_violated = false; // rho >= 1: averaging does not contract
};

// Realized mixing matrix for one round: off-diagonal w_ij * s_ij, diagonal
// 1 - sum_{l != i} w_il * s_il. Symmetric doubly stochastic by construction.
Matrix build_snapshot(const Matrix& w, const Matrix& s);

// Expectation over masks: off-diagonal w_ij * p_ij, diagonal completing the
// row sum to 1. Symmetric doubly stochastic.
Matrix expected_mixing(const Matrix& w, const Matrix& p);

// Closed-form first and second moments of the realized mixing matrix.
MixingMoments second_moment(const Matrix& w, const Matrix& p);

// Dense symmetric eigendecomposition; requires symmetry and row sums of 1
// within 1e-9.
SpectralSummary spectral_summary(const Matrix& a);

// Just the second-largest eigenvalue magnitude, without the eigenvector.
// Closed form for M = 2, dense eigenvalues otherwise. The caller guarantees
// a symmetric doubly stochastic input (no validation: optimizer hot path).
double dense_rho(const Matrix& a);

// Uniform design: every entry 1/M.
Matrix design_equal(std::size_t m);

// Metropolis-style design from reliabilities: w_ij = p_ij / max(d_i, d_j)
// with weighted degrees d_i = sum_k p_ik; diagonal completes rows to 1.
Matrix design_metropolis_hastings(const Matrix& p);

// Symmetric, rows sum to 1, entries in [0,1] (within tol); throws otherwise.
void validate_weight_matrix(const Matrix& w, double tol = 1e-9);
// Symmetric and rows sum to 1 (within tol); entries may be negative.
void validate_doubly_stochastic(const Matrix& a, double tol = 1e-9);

} // namespace dflopt
