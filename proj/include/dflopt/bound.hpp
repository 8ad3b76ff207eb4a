#pragma once

#include <cstddef>

// Ergodic convergence bound for decentralized SGD under unreliable links, as
// a function of the mixing rate and problem constants, plus its stepsize
// precondition. All pure scalar arithmetic.

namespace dflopt {

struct BoundParams {
    double smoothness = 1.0;     // omega
    double noise_var = 0.0;      // alpha^2, stochastic-gradient variance
    double heterogeneity = 0.0;  // beta^2, inter-device gradient divergence
    double learning_rate = 0.0;  // lambda
    std::size_t devices = 1;     // M
    std::size_t horizon = 1;     // T
    double initial_loss = 0.0;   // f0
    double optimal_loss = 0.0;   // f*
    double rho = 0.0;            // mixing rate of the squared-mean matrix, in [0,1)
};

// G = M lambda^2 omega^2 / ((1 - sqrt(rho))^2 - 18 M lambda^2 omega^2).
// Throws when the denominator is not positive (stepsize too large for the
// network's mixing rate).
double eval_G(const BoundParams& p);

// (1 / (1/2 - 9G)) * ( (f0 - f*) / (lambda T) + lambda omega alpha^2 / (2M)
//                      + alpha^2 G + 9 beta^2 G ).
// Requires 1/2 - 9G > 0 (implied by the stepsize precondition).
double eval_bound(const BoundParams& p);

struct PreconditionCheck {
    bool holds = false;
    double margin = 0.0; // (1 - sqrt(rho)) / (6 sqrt(M) omega) - lambda
};

// Strict stepsize condition lambda < (1 - sqrt(rho)) / (6 sqrt(M) omega).
PreconditionCheck check_precondition(const BoundParams& p);

} // namespace dflopt
