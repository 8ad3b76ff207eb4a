#include "doctest.h"

#include <cmath>
#include <cstdint>

#include "dflopt/mixing.hpp"
#include "dflopt/oracles.hpp"
#include "dflopt/rng.hpp"
#include "dflopt/weightopt.hpp"
#include "testutil.hpp"

using namespace dflopt;

namespace {

// Linearization value sum_{i<j} g_ij (wprime_ij - w_ij): one term per
// unordered pair, matching the one-variable-per-pair convention.
double pairwise_inner(const Matrix& g, const Matrix& wprime, const Matrix& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = i + 1; j < g.cols(); ++j)
            acc += g(i, j) * (wprime(i, j) - w(i, j));
    return acc;
}

} // namespace

TEST_CASE("subgradient entries follow the closed form") {
    Matrix p(2, 2, 0.0);
    p(0, 1) = p(1, 0) = 0.8;
    Vec v = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)};

    Matrix g = subgradient(p, v, SubgradientBranch::Lambda2);
    CHECK(g(0, 1) == doctest::Approx(-1.6).epsilon(1e-12));
    CHECK(g(1, 0) == doctest::Approx(-1.6).epsilon(1e-12));
    CHECK(g(0, 0) == 0.0);
    CHECK(g(1, 1) == 0.0);

    Matrix h = subgradient(p, v, SubgradientBranch::MinusLambdaM);
    CHECK(h(0, 1) == doctest::Approx(1.6).epsilon(1e-12));

    // Branches differ only in sign.
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(g(i, j) == -h(i, j));

    // Non-unit eigenvector is rejected.
    Vec bad = {1.0, -1.0};
    CHECK_THROWS(subgradient(p, bad, SubgradientBranch::Lambda2));
}

TEST_CASE("subgradient linearization never overestimates the objective") {
    std::uint64_t key = 0xD00;
    std::size_t checked = 0;
    for (std::size_t m = 3; m <= 8; ++m) {
        for (int rep = 0; rep < 20; ++rep) {
            Matrix p = testutil::random_symmetric_hollow(m, key++);
            Matrix w = testutil::random_weights(m, key++);
            Matrix wp = testutil::random_weights(m, key++);

            SpectralSummary at = spectral_summary(expected_mixing(w, p));
            if (at.rho <= 1e-12) continue; // flat point: nothing to certify
            SubgradientBranch branch = at.lambda2 >= -at.lambda_min
                                           ? SubgradientBranch::Lambda2
                                           : SubgradientBranch::MinusLambdaM;
            Matrix g = subgradient(p, at.eigenvector, branch);

            double predicted = at.rho + pairwise_inner(g, wp, w);
            double actual = spectral_summary(expected_mixing(wp, p)).rho;
            CHECK(actual >= predicted - 1e-9);
            ++checked;
        }
    }
    CHECK(checked >= 100);
}

TEST_CASE("tail projection handles the worked examples") {
    {
        ProjectionResult r = project_tail({0.2, 0.3}, 1.0);
        CHECK(r.nu == 0.0);
        CHECK(r.q[0] == doctest::Approx(0.2).epsilon(1e-15));
        CHECK(r.q[1] == doctest::Approx(0.3).epsilon(1e-15));
    }
    {
        ProjectionResult r = project_tail({0.7, 0.6}, 1.0);
        CHECK(r.nu == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(r.q[0] == doctest::Approx(0.55).epsilon(1e-12));
        CHECK(r.q[1] == doctest::Approx(0.45).epsilon(1e-12));
    }
    {
        ProjectionResult r = project_tail({-0.2, 0.5}, 1.0);
        CHECK(r.q[0] == 0.0);
        CHECK(r.q[1] == doctest::Approx(0.5).epsilon(1e-15));
    }
    CHECK_THROWS(project_tail({0.1, 0.1}, -0.01));
    // Empty tail is a no-op.
    CHECK(project_tail({}, 0.5).q.empty());
}

TEST_CASE("tail projection satisfies the optimality conditions") {
    std::uint64_t key = 0xD40;
    for (int rep = 0; rep < 200; ++rep) {
        std::size_t n = 1 + rep % 12;
        Vec w = testutil::random_vec(n, key++, -0.5, 1.2);
        double budget = 0.02 + 1.5 * rng::u01_at(key++, rng::Tag::Generic);
        ProjectionResult r = project_tail(w, budget);

        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(r.q[i] >= 0.0);
            total += r.q[i];
        }
        CHECK(total <= budget + 1e-12);
        CHECK(r.nu >= 0.0);
        // Complementary slackness: a positive multiplier means a tight budget.
        if (r.nu > 1e-12) CHECK(total == doctest::Approx(budget).epsilon(1e-10));
        // Stationarity of 0.5 * ||q - w||^2 + 0.5 * nu * (sum(q) - budget).
        for (std::size_t i = 0; i < n; ++i) {
            if (r.q[i] > 1e-12) {
                CHECK(r.q[i] == doctest::Approx(w[i] - 0.5 * r.nu).epsilon(1e-10));
            } else {
                CHECK(0.5 * r.nu >= w[i] - 1e-10);
            }
        }

        // Idempotence.
        ProjectionResult again = project_tail(r.q, budget);
        CHECK(max_abs_diff(again.q, r.q) <= 1e-12);
    }
}

TEST_CASE("tail projection agrees with the grid-search reference") {
    std::uint64_t key = 0xD80;
    for (int rep = 0; rep < 6; ++rep) {
        std::size_t n = rep < 3 ? 2 : 3;
        Vec w = testutil::random_vec(n, key++, -0.4, 1.1);
        double budget = 0.1 + rng::u01_at(key++, rng::Tag::Generic);
        double res = n == 2 ? 1e-3 : 5e-3;

        Vec grid = oracles::grid_projection(w, budget, res);
        ProjectionResult exact = project_tail(w, budget);

        // No feasible grid point may beat the projection, and the grid
        // optimum's objective can exceed it by at most the rounding slack
        // (nearest feasible grid point to the true optimum).
        double d_exact = 0.0, d_grid = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d_exact += (exact.q[i] - w[i]) * (exact.q[i] - w[i]);
            d_grid += (grid[i] - w[i]) * (grid[i] - w[i]);
        }
        double slack = 4.0 * res * (std::sqrt(d_exact) + res);
        CHECK(d_grid >= d_exact - 1e-12);
        CHECK(d_grid <= d_exact + slack);
        // Strong convexity turns the objective gap into a distance bound.
        CHECK(max_abs_diff(grid, exact.q) <= std::sqrt(slack) + 1e-12);
    }
}

TEST_CASE("weight projection returns feasible matrices and fixes infeasible input") {
    std::uint64_t key = 0xDC0;
    for (std::size_t m : {3u, 5u, 9u}) {
        // Already-feasible input passes through unchanged.
        Matrix w = testutil::random_weights(m, key++);
        Matrix same = project_weights(w);
        CHECK(max_abs_diff(same, w) <= 1e-12);

        // A raw subgradient step lands outside the set; the projection must
        // restore feasibility and then be idempotent.
        Matrix step = testutil::random_symmetric_hollow(m, key++, -0.6, 0.6);
        Matrix raw = w + step;
        SequentialProjectionStats stats;
        Matrix proj = project_weights(raw, &stats);
        CHECK_NOTHROW(validate_weight_matrix(proj, 1e-9));
        Matrix twice = project_weights(proj);
        CHECK(max_abs_diff(twice, proj) <= 1e-12);
    }

    // Asymmetric input is rejected.
    Matrix bad(3, 3, 0.2);
    bad(0, 1) = 0.9;
    CHECK_THROWS(project_weights(bad));
}

TEST_CASE("weight projection repairs rows driven past their budget") {
    // Four devices pile weight onto device 4; once their rows are fixed the
    // last row's off-diagonal sum exceeds 1 and its diagonal would go
    // negative without the rescale pass.
    const std::size_t m = 5;
    Matrix raw(m, m, 0.0);
    for (std::size_t j = 0; j + 1 < m; ++j) {
        raw(j, m - 1) = 0.9;
        raw(m - 1, j) = 0.9;
    }
    SequentialProjectionStats stats;
    Matrix proj = project_weights(raw, &stats);
    CHECK(stats.repaired_rows >= 1);
    CHECK_NOTHROW(validate_weight_matrix(proj, 1e-9));
    CHECK(proj(m - 1, m - 1) >= -1e-12);
}

TEST_CASE("inexactness bound is linear in the eigenvector error") {
    Matrix p = testutil::random_symmetric_hollow(3, 0xE01, 0.8, 0.8);
    double sum_p_sq = 6 * 0.64; // ordered pairs

    Vec v_exact = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0};
    Vec v_approx = {0.72, -0.69, 0.0};
    double n = std::sqrt(dot(v_approx, v_approx));
    for (auto& x : v_approx) x /= n;

    InexactnessDiagnostics d = inexactness_check(p, v_approx, v_exact);
    double eps = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        eps += (v_approx[i] - v_exact[i]) * (v_approx[i] - v_exact[i]);
    CHECK(d.epsilon == doctest::Approx(eps).epsilon(1e-12));
    CHECK(d.deviation_bound == doctest::Approx(32.0 * eps * sum_p_sq).epsilon(1e-12));
    CHECK(d.ratio <= 1.0 + 1e-12);
    CHECK(d.deviation_sq <= d.deviation_bound + 1e-12);

    CHECK_THROWS(inexactness_check(p, Vec{1.0, -1.0, 0.0}, v_exact));
}

TEST_CASE("inexactness bound holds for arbitrary unit vectors") {
    std::uint64_t key = 0xE10;
    for (int rep = 0; rep < 20; ++rep) {
        std::size_t m = 3 + rep % 5;
        Matrix p = testutil::random_symmetric_hollow(m, key++);
        Vec a = testutil::random_vec(m, key++);
        Vec b = testutil::random_vec(m, key++);
        scale(1.0 / norm2(a), a);
        scale(1.0 / norm2(b), b);
        InexactnessDiagnostics d = inexactness_check(p, a, b);
        CHECK(d.ratio <= 1.0 + 1e-12);
    }
}

TEST_CASE("optimizer drives the two-device objective to its closed-form minimum") {
    // With one link of reliability 0.8 the objective is |1 - 1.6 w| with
    // minimizer w = 0.625.
    Matrix p(2, 2, 0.0);
    p(0, 1) = p(1, 0) = 0.8;

    OptimizerConfig cfg;
    cfg.schedule = OptimizerConfig::StepSchedule::Constant;
    cfg.step_size = 1e-4;
    cfg.outer_iterations = 1000;
    cfg.inner.max_iterations = 200;
    cfg.inner.residual_tolerance = 1e-9;
    cfg.seed = 21;

    for (OptimizeMode mode : {OptimizeMode::Distributed, OptimizeMode::Centralized}) {
        OptimizeResult r = optimize_weights(p, cfg, mode);
        CHECK(r.initial_rho == doctest::Approx(0.2).epsilon(1e-12)); // start at 1/M
        CHECK(r.best_rho <= 5e-4);
        CHECK(std::fabs(r.weights(0, 1) - 0.625) <= 5e-4);
        CHECK(r.weights(0, 0) == doctest::Approx(1.0 - r.weights(0, 1)).epsilon(1e-12));
        CHECK(r.rho_trace.size() == cfg.outer_iterations + 1);
        CHECK(r.rho_trace[r.best_iteration] == doctest::Approx(r.best_rho));
        CHECK(r.best_rho <= r.initial_rho);
        CHECK(r.step_sizes.size() == cfg.outer_iterations);
        CHECK(r.step_sizes[0] == 1e-4);
        CHECK(r.step_sizes[999] == 1e-4);
    }
}

TEST_CASE("harmonic step schedule also reaches the minimum") {
    Matrix p(2, 2, 0.0);
    p(0, 1) = p(1, 0) = 0.8;

    OptimizerConfig cfg;
    cfg.schedule = OptimizerConfig::StepSchedule::Harmonic;
    cfg.step_size = 0.02;
    cfg.outer_iterations = 3000;
    cfg.inner.residual_tolerance = 1e-9;
    cfg.seed = 4;

    OptimizeResult r = optimize_weights(p, cfg, OptimizeMode::Distributed);
    CHECK(r.best_rho <= 1e-3);
    CHECK(r.step_sizes[0] == doctest::Approx(0.02));
    CHECK(r.step_sizes[1] == doctest::Approx(0.01));
    CHECK(r.step_sizes[2999] == doctest::Approx(0.02 / 3000.0));
}

TEST_CASE("perfectly reliable uniform design is a fixed point at zero objective") {
    Matrix p = testutil::random_symmetric_hollow(4, 0, 1.0, 1.0); // all links certain

    OptimizerConfig cfg;
    cfg.step_size = 0.01;
    cfg.outer_iterations = 50;
    cfg.seed = 9;

    for (OptimizeMode mode : {OptimizeMode::Distributed, OptimizeMode::Centralized}) {
        OptimizeResult r = optimize_weights(p, cfg, mode);
        CHECK(r.initial_rho <= 1e-12);
        CHECK(r.best_rho <= 1e-12);
        for (double rho : r.rho_trace) CHECK(rho <= 1e-12);
        CHECK(max_abs_diff(r.weights, design_equal(4)) <= 1e-15);
    }
}

TEST_CASE("optimizer improves a larger network and records diagnostics") {
    Matrix p = testutil::random_symmetric_hollow(8, 0xE40, 0.3, 1.0);

    OptimizerConfig cfg;
    cfg.schedule = OptimizerConfig::StepSchedule::Harmonic;
    cfg.step_size = 0.05;
    cfg.outer_iterations = 120;
    cfg.inner.max_iterations = 3000;
    cfg.inner.residual_tolerance = 1e-8;
    cfg.collect_diagnostics = true;
    cfg.seed = 77;

    OptimizeResult r = optimize_weights(p, cfg, OptimizeMode::Distributed);
    CHECK(r.best_rho < r.initial_rho);
    CHECK_NOTHROW(validate_weight_matrix(r.weights, 1e-9));
    CHECK(r.diagnostics.size() == 120);
    for (const auto& d : r.diagnostics) {
        CHECK(d.ratio <= 1.0 + 1e-12);
        CHECK(d.delta >= d.deviation_sq);
    }

    // The centralized reference lands in the same neighborhood.
    OptimizeResult rc = optimize_weights(p, cfg, OptimizeMode::Centralized);
    CHECK(rc.best_rho < rc.initial_rho);
    CHECK(std::fabs(rc.best_rho - r.best_rho) <= 0.05);
}
