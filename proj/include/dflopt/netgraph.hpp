#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dflopt/matrix.hpp"

// Device placement and link modeling: geometric reliability matrices
// p_ij = exp(-r * d_ij^v), per-round Bernoulli transmission masks with
// reciprocal links (one draw per unordered pair), and reliability estimation
// from observed mask history.

namespace dflopt {

struct NetworkSpec {
    std::size_t devices = 0;                       // M
    std::vector<std::array<double, 2>> placement;  // points in the unit square
    double decay_scale = 0.0;                      // r
    double decay_exponent = 1.0;                   // v
    std::uint64_t seed = 0;
};

// Throws a config error when invariants are violated (M >= 2, coordinates in
// [0,1]^2, decay_scale >= 0, decay_exponent > 0, placement size == devices).
void validate_spec(const NetworkSpec& spec);

// Spec with placements drawn uniformly in the unit square from (seed).
NetworkSpec make_random_spec(std::size_t devices, double decay_scale,
                             double decay_exponent, std::uint64_t seed);

// Same spec with placements re-drawn deterministically from (seed, round);
// round 0 reproduces make_random_spec's placements.
NetworkSpec perturb_placement(const NetworkSpec& spec, std::uint64_t round);

// Reliability matrix: p_ij = exp(-r * d_ij^v) for i != j, zero diagonal.
Matrix generate_geometric(const NetworkSpec& spec);

// One Bernoulli(p_ij) draw per unordered pair, mirrored to both triangles.
// Pure function of (P, seed, round).
Matrix sample_mask(const Matrix& p, std::uint64_t seed, std::uint64_t round);

// Empirical success frequency per pair over a mask history.
Matrix estimate_reliability(const std::vector<Matrix>& history);

// Invariant checks (throw on failure): symmetry, zero diagonal, and range
// [0,1] for reliabilities / {0,1} for masks.
void validate_reliability(const Matrix& p);
void validate_mask(const Matrix& s);

} // namespace dflopt
