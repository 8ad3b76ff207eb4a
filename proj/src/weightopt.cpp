#include "dflopt/weightopt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dflopt/errors.hpp"
#include "dflopt/kernels.hpp"
#include "dflopt/mixing.hpp"
#include "dflopt/netgraph.hpp"
#include "dflopt/rng.hpp"

namespace dflopt {

Matrix subgradient(const Matrix& p, const Vec& v, SubgradientBranch branch) {
    const std::size_t m = p.rows();
    if (v.size() != m) throw runtime_error("subgradient: vector size mismatch");
    double nrm = norm2(v);
    if (std::fabs(nrm - 1.0) > 1e-9)
        throw runtime_error("subgradient: eigenvector is not unit norm");

    const double sign = branch == SubgradientBranch::Lambda2 ? -1.0 : 1.0;
    Matrix g(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double d = v[i] - v[j];
            double val = sign * p(i, j) * d * d;
            g(i, j) = val;
            g(j, i) = val;
        }
    }
    return g;
}

ProjectionResult project_tail(const Vec& w_tail, double budget) {
    if (budget < 0.0)
        throw runtime_error("project_tail: negative budget (empty feasible set)");
    const std::size_t m = w_tail.size();
    ProjectionResult res;
    res.budget = budget;
    res.q.assign(m, 0.0);

    // Clipping alone feasible: the sum constraint is slack, multiplier zero.
    double clipped_sum = 0.0;
    for (double w : w_tail) clipped_sum += std::max(0.0, w);
    if (clipped_sum <= budget) {
        for (std::size_t j = 0; j < m; ++j) res.q[j] = std::max(0.0, w_tail[j]);
        res.nu = 0.0;
        return res;
    }

    // Active sum constraint: find nu > 0 with sum_j max(0, w_j - nu/2) = budget.
    // Sorting the positive entries descending makes the candidate multiplier
    // for each support size k exact: nu_k = 2 (prefix_k - budget) / k.
    Vec sorted(w_tail);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double prefix = 0.0;
    double nu = -1.0;
    for (std::size_t k = 0; k < m; ++k) {
        if (sorted[k] <= 0.0) break;
        prefix += sorted[k];
        double cand = 2.0 * (prefix - budget) / static_cast<double>(k + 1);
        bool lower_ok = cand >= 0.0 && cand / 2.0 <= sorted[k];
        bool upper_ok = (k + 1 == m) || (cand / 2.0 >= sorted[k + 1]);
        if (lower_ok && upper_ok) {
            nu = cand;
            break;
        }
    }
    if (nu < 0.0) {
        // Fallback: h(nu) = sum_j max(0, w_j - nu/2) is continuous and
        // nonincreasing; bisect it to the budget.
        double lo = 0.0, hi = 2.0 * sorted[0];
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            double s = 0.0;
            for (double w : w_tail) s += std::max(0.0, w - mid / 2.0);
            (s > budget ? lo : hi) = mid;
        }
        nu = 0.5 * (lo + hi);
    }

    for (std::size_t j = 0; j < m; ++j) res.q[j] = std::max(0.0, w_tail[j] - nu / 2.0);
    res.nu = nu;
    return res;
}

namespace {

// One sequential sweep; returns the number of rows whose completed diagonal
// came out negative (their budget was already overspent by earlier rows).
std::size_t sequential_pass(Matrix& w) {
    const std::size_t m = w.rows();
    std::size_t negative_rows = 0;
    Vec tail;
    for (std::size_t i = 0; i < m; ++i) {
        double fixed = 0.0;
        for (std::size_t j = 0; j < i; ++j) fixed += w(i, j);
        double budget = 1.0 - fixed;

        tail.assign(w.row(i) + i + 1, w.row(i) + m);
        if (budget >= 0.0) {
            ProjectionResult pr = project_tail(tail, budget);
            for (std::size_t j = i + 1; j < m; ++j) {
                w(i, j) = pr.q[j - i - 1];
                w(j, i) = pr.q[j - i - 1];
            }
        } else {
            // Overspent row: the closest nonnegative tail is zero; the
            // diagonal goes negative and the repair stage rescues it.
            for (std::size_t j = i + 1; j < m; ++j) {
                w(i, j) = 0.0;
                w(j, i) = 0.0;
            }
            ++negative_rows;
        }
        double off = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            if (j != i) off += w(i, j);
        w(i, i) = 1.0 - off;
        if (budget >= 0.0 && w(i, i) < -1e-12) ++negative_rows;
    }
    return negative_rows;
}

} // namespace

Matrix project_weights(const Matrix& w_raw, SequentialProjectionStats* stats) {
    if (w_raw.rows() != w_raw.cols() || w_raw.rows() < 2)
        throw runtime_error("project_weights: need a square matrix, M >= 2");
    if (!is_symmetric(w_raw, 1e-9))
        throw runtime_error("project_weights: input is not symmetric");

    Matrix w = w_raw;
    std::size_t bad = sequential_pass(w);
    std::size_t repaired = 0;
    if (bad > 0) {
        // Rescale each offending row/column's off-diagonal so its diagonal
        // returns to zero, then re-run one sequential pass.
        const std::size_t m = w.rows();
        for (std::size_t i = 0; i < m; ++i) {
            if (w(i, i) >= 0.0) continue;
            double off = 1.0 - w(i, i); // > 1
            double factor = 1.0 / off;
            for (std::size_t j = 0; j < m; ++j) {
                if (j == i) continue;
                w(i, j) *= factor;
                w(j, i) = w(i, j);
            }
            w(i, i) = 0.0;
            ++repaired;
        }
        sequential_pass(w);
    }
    if (stats) stats->repaired_rows += repaired;
    validate_weight_matrix(w, 1e-9); // hard error when repair failed
    return w;
}

InexactnessDiagnostics inexactness_check(const Matrix& p, const Vec& v_approx,
                                         const Vec& v_exact) {
    for (const Vec* v : {&v_approx, &v_exact})
        if (std::fabs(norm2(*v) - 1.0) > 1e-9)
            throw runtime_error("inexactness_check: vectors must be unit norm");

    InexactnessDiagnostics d;
    Vec diff(v_approx.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = v_approx[i] - v_exact[i];
    d.epsilon = kern::ops().nrm2sq(diff.data(), diff.size());

    // Both subgradients on the same branch: the deviation is branch-agnostic
    // because flipping the branch negates both terms.
    Matrix ga = subgradient(p, v_approx, SubgradientBranch::Lambda2);
    Matrix gr = subgradient(p, v_exact, SubgradientBranch::Lambda2);
    Matrix delta = ga - gr;
    double dev = kern::ops().nrm2sq(delta.data(), delta.rows() * delta.cols());
    d.deviation_sq = dev;

    double p2 = 0.0; // sum over ordered pairs, matching the Frobenius sum
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < p.cols(); ++j)
            if (j != i) p2 += p(i, j) * p(i, j);
    d.deviation_bound = 32.0 * d.epsilon * p2;
    d.ratio = d.deviation_bound > 0.0 ? d.deviation_sq / d.deviation_bound : 0.0;

    if (d.deviation_sq > d.deviation_bound + 1e-12)
        throw verification_error("subgradient deviation exceeds its closed-form bound");
    return d;
}

OptimizeResult optimize_weights(const Matrix& p, const OptimizerConfig& cfg,
                                OptimizeMode mode) {
    validate_reliability(p);
    const std::size_t m = p.rows();
    if (cfg.outer_iterations < 1)
        throw config_error("optimize_weights: need at least one iteration");
    if (cfg.step_size <= 0.0) throw config_error("optimize_weights: step size must be > 0");

    Matrix w = cfg.initial_weights.empty() ? design_equal(m) : cfg.initial_weights;
    validate_weight_matrix(w, 1e-9);
    if (w.rows() != m) throw config_error("optimize_weights: initial weights wrong size");

    OptimizeResult out;
    out.rho_trace.reserve(cfg.outer_iterations + 1);
    out.step_sizes.reserve(cfg.outer_iterations);
    out.repair_trace.reserve(cfg.outer_iterations);

    Matrix wbar = expected_mixing(w, p);
    double rho = dense_rho(wbar);
    out.rho_trace.push_back(rho);
    out.initial_rho = rho;
    out.best_rho = rho;
    out.best_iteration = 0;
    out.weights = w;

    SequentialProjectionStats proj_stats;

    for (std::size_t n = 1; n <= cfg.outer_iterations; ++n) {
        double gamma = cfg.schedule == OptimizerConfig::StepSchedule::Constant
                           ? cfg.step_size
                           : cfg.step_size / static_cast<double>(n);
        out.step_sizes.push_back(gamma);
        std::size_t repaired_before = proj_stats.repaired_rows;

        // At the exact optimum (rho = 0) the zero matrix is a valid
        // subgradient; keep the iterate fixed instead of stepping away.
        bool stepped = false;
        if (rho > 1e-12) {
            Vec v;
            SubgradientBranch branch = SubgradientBranch::Lambda2;
            bool degenerate = false;
            if (mode == OptimizeMode::Distributed) {
                EigenResult er = orthogonal_iteration(
                    wbar, cfg.inner, rng::stream_key(cfg.seed, rng::Tag::Trial, n));
                degenerate = er.degenerate;
                if (!degenerate) {
                    v = std::move(er.eigenvector);
                    branch = er.rayleigh >= 0.0 ? SubgradientBranch::Lambda2
                                                : SubgradientBranch::MinusLambdaM;
                }
            } else {
                SpectralSummary ss = spectral_summary(wbar);
                v = ss.eigenvector;
                branch = ss.lambda2 >= -ss.lambda_min ? SubgradientBranch::Lambda2
                                                      : SubgradientBranch::MinusLambdaM;
            }

            if (!degenerate) {
                Matrix g = subgradient(p, v, branch);
                if (cfg.collect_diagnostics) {
                    SpectralSummary dense = spectral_summary(wbar);
                    InexactnessDiagnostics diag = inexactness_check(p, v, dense.eigenvector);
                    double g2 = kern::ops().nrm2sq(g.data(), m * m);
                    diag.step_energy = 0.5 * gamma * g2;
                    diag.delta = diag.step_energy + diag.deviation_sq;
                    out.diagnostics.push_back(diag);
                }
                Matrix raw = w - gamma * g;
                w = project_weights(raw, &proj_stats);
                wbar = expected_mixing(w, p);
                rho = dense_rho(wbar);
                stepped = true;
            }
        }
        if (!stepped && cfg.collect_diagnostics)
            out.diagnostics.push_back({}); // zero step: all diagnostics vanish
        out.repair_trace.push_back(proj_stats.repaired_rows - repaired_before);

        out.rho_trace.push_back(rho);
        if (rho < out.best_rho) {
            out.best_rho = rho;
            out.best_iteration = n;
            out.weights = w;
        }
    }

    out.repair_count = proj_stats.repaired_rows;
    return out;
}

} // namespace dflopt
