#pragma once

#include <cstdint>
#include <utility>

#include "dflopt/matrix.hpp"

// Independent brute-force references used by tests, acceptance runs, and the
// CLI's self-verification modes. These deliberately avoid the closed forms
// they are checking: moments come from explicit enumeration or sampling over
// link outcomes, and the projection reference is a grid search.

namespace dflopt::oracles {

struct EnumerationBudget {
    std::size_t max_pairs = 12; // at most 2^12 masks enumerated
};

// Exact E[Whut] and E[Whut^2] by summing build_snapshot over every possible
// mask of the links with uncertain outcome (0 < p_ij < 1), weighted by its
// probability. Throws when more than budget.max_pairs links are uncertain.
std::pair<Matrix, Matrix> exact_moments_by_enumeration(
    const Matrix& w, const Matrix& p, const EnumerationBudget& budget = {});

struct MomentEstimate {
    Matrix first_moment;   // empirical mean of snapshots
    Matrix second_moment;  // empirical mean of squared snapshots
    Matrix first_se;       // entrywise standard error of the first-moment mean
    Matrix second_se;      // entrywise standard error of the second-moment mean
    std::size_t samples = 0;
};

// Empirical moments over `samples` mask draws (rounds 0..samples-1 of the
// given seed's mask stream).
MomentEstimate mc_moments(const Matrix& w, const Matrix& p, std::size_t samples,
                          std::uint64_t seed);

// Reference minimizer of ||q - w_tail||^2 over {q >= 0, sum(q) <= l} by grid
// search. Exhaustive at the requested resolution when the grid is small
// enough, multiscale refinement (coarse exhaustive pass, then windowed
// refinement) otherwise; dimension must be <= 3. Throws if l < 0.
Vec grid_projection(const Vec& w_tail, double l, double resolution);

// Dense symmetric eigenvalues in ascending order (general symmetric input).
Vec symmetric_eigenvalues(const Matrix& a);

} // namespace dflopt::oracles
