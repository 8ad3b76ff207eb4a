#include "dflopt/bound.hpp"

#include <cmath>

#include "dflopt/errors.hpp"

namespace dflopt {

namespace {

void validate_common(const BoundParams& p, bool allow_rho_one = false) {
    if (p.smoothness <= 0.0) throw config_error("bound: smoothness must be > 0");
    if (p.learning_rate <= 0.0) throw config_error("bound: learning rate must be > 0");
    if (p.devices < 1) throw config_error("bound: device count must be >= 1");
    if (p.horizon < 1) throw config_error("bound: horizon must be >= 1");
    if (p.rho < 0.0 || (allow_rho_one ? p.rho > 1.0 : p.rho >= 1.0))
        throw config_error(allow_rho_one ? "bound: rho must be in [0,1]"
                                         : "bound: rho must be in [0,1)");
    if (p.noise_var < 0.0 || p.heterogeneity < 0.0)
        throw config_error("bound: variance terms must be >= 0");
}

} // namespace

double eval_G(const BoundParams& p) {
    validate_common(p);
    const double mlw = static_cast<double>(p.devices) * p.learning_rate * p.learning_rate *
                       p.smoothness * p.smoothness; // M lambda^2 omega^2
    const double contraction = 1.0 - std::sqrt(p.rho);
    const double denom = contraction * contraction - 18.0 * mlw;
    if (denom <= 0.0)
        throw runtime_error("bound: stepsize too large for this mixing rate "
                            "(nonpositive denominator in G)");
    return mlw / denom;
}

double eval_bound(const BoundParams& p) {
    const double g = eval_G(p);
    const double prefactor_denom = 0.5 - 9.0 * g;
    if (prefactor_denom <= 0.0)
        throw runtime_error("bound: prefactor is not positive (G too large)");
    const double horizon_term =
        (p.initial_loss - p.optimal_loss) / (p.learning_rate * static_cast<double>(p.horizon));
    const double noise_term = p.learning_rate * p.smoothness * p.noise_var /
                              (2.0 * static_cast<double>(p.devices));
    return (horizon_term + noise_term + p.noise_var * g + 9.0 * p.heterogeneity * g) /
           prefactor_denom;
}

PreconditionCheck check_precondition(const BoundParams& p) {
    validate_common(p, /*allow_rho_one=*/true);
    PreconditionCheck c;
    const double limit = (1.0 - std::sqrt(p.rho)) /
                         (6.0 * std::sqrt(static_cast<double>(p.devices)) * p.smoothness);
    c.margin = limit - p.learning_rate;
    c.holds = p.learning_rate < limit;
    return c;
}

} // namespace dflopt
