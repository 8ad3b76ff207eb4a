// Acceptance suite: twelve end-to-end checks, one per release criterion,
// each printing a single PASS/FAIL line with its key measurement. Run with
// no argument for the full suite or with an index (1-12) for one criterion.
// The process exits 0 only when every executed criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "dflopt/bound.hpp"
#include "dflopt/config.hpp"
#include "dflopt/csvio.hpp"
#include "dflopt/dflsim.hpp"
#include "dflopt/errors.hpp"
#include "dflopt/experiment.hpp"
#include "dflopt/mixing.hpp"
#include "dflopt/netgraph.hpp"
#include "dflopt/oracles.hpp"
#include "dflopt/rng.hpp"
#include "dflopt/spectral.hpp"
#include "dflopt/weightopt.hpp"
#include "testsupport.hpp"
#include "testutil.hpp"

using namespace dflopt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

Matrix hollow_ones(std::size_t m) {
    Matrix p = Matrix::constant(m, m, 1.0);
    for (std::size_t i = 0; i < m; ++i) p(i, i) = 0.0;
    return p;
}

// Random reliability matrix mixing interior values with exact 0/1 links.
Matrix random_reliability(std::size_t m, std::uint64_t key) {
    rng::Stream s(key);
    Matrix p(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            double u = s.next_u01();
            double v = u < 0.15 ? 0.0 : (u > 0.85 ? 1.0 : u);
            p(i, j) = v;
            p(j, i) = v;
        }
    return p;
}

// ------------------------------------------------------------ criterion 1

// Closed-form first and second mixing moments equal exhaustive enumeration
// over every link outcome, entrywise to 1e-12, on 50 small random instances.
Outcome criterion_moment_exactness() {
    double worst = 0.0;
    std::size_t idx = 0;
    for (std::size_t m : {std::size_t{2}, std::size_t{3}}) {
        for (std::size_t k = 0; k < 25; ++k, ++idx) {
            Matrix w = testutil::random_weights(m, rng::stream_key(0xAC01, rng::Tag::Generic, idx));
            Matrix p = random_reliability(m, rng::stream_key(0xAC01, rng::Tag::Perturb, idx));
            auto [e1, e2] = oracles::exact_moments_by_enumeration(w, p);
            MixingMoments mm = second_moment(w, p);
            worst = std::max(worst, max_abs_diff(mm.first_moment, e1));
            worst = std::max(worst, max_abs_diff(mm.second_moment, e2));
        }
    }
    return {worst <= 1e-12, fmt("max |closed form - enumeration| = %.2e over 50 instances "
                                "(limit 1e-12)", worst)};
}

// ------------------------------------------------------------ criterion 2

// Monte Carlo moment estimates on an M=10 geometric network agree with the
// closed forms within 4 standard errors for at least 99% of entries.
Outcome criterion_monte_carlo() {
    NetworkSpec spec = make_random_spec(10, 2.0, 2.0, 0xAC02);
    Matrix p = generate_geometric(spec);
    Matrix w = design_metropolis_hastings(p);
    oracles::MomentEstimate est =
        oracles::mc_moments(w, p, 100000, rng::stream_key(0xAC02, rng::Tag::Generic, 1));
    MixingMoments closed = second_moment(w, p);

    std::size_t within = 0, total = 0;
    auto tally = [&](const Matrix& mc, const Matrix& exact, const Matrix& se) {
        for (std::size_t i = 0; i < mc.rows(); ++i)
            for (std::size_t j = 0; j < mc.cols(); ++j) {
                double dev = std::abs(mc(i, j) - exact(i, j));
                if (dev <= std::max(4.0 * se(i, j), 1e-15)) ++within;
                ++total;
            }
    };
    tally(est.first_moment, closed.first_moment, est.first_se);
    tally(est.second_moment, closed.second_moment, est.second_se);
    double frac = static_cast<double>(within) / static_cast<double>(total);
    return {frac >= 0.99, fmt("%.2f%% of %zu entries within 4 SE after %zu snapshots "
                              "(minimum 99%%)", 100.0 * frac, total, est.samples)};
}

// ------------------------------------------------------------ criterion 3

// The simulated-distributed eigensolver matches the dense mixing rate to
// 1e-8 on 100 gapped M=20 matrices.
Outcome criterion_eigensolver() {
    IterationConfig ic;
    ic.max_iterations = 10000;
    ic.residual_tolerance = 1e-7;
    double worst = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
        Matrix a = testsupport::random_doubly_stochastic_with_gap(
            20, 0.05, rng::stream_key(0xAC03, rng::Tag::Generic, k));
        EigenResult er = orthogonal_iteration(a, ic, rng::stream_key(0xAC03, rng::Tag::EigenInit, k));
        double exact = spectral_summary(a).rho;
        worst = std::max(worst, std::abs(er.rho_estimate - exact));
    }
    return {worst <= 1e-8, fmt("max |estimate - dense rho| = %.2e over 100 matrices "
                               "(limit 1e-8)", worst)};
}

// ------------------------------------------------------------ criterion 4

// Tail projection agrees with the grid-search oracle to the grid resolution
// and satisfies the KKT conditions to 1e-9 on 500 random instances.
Outcome criterion_projection() {
    double worst_grid = 0.0, worst_kkt = 0.0;
    for (std::size_t k = 0; k < 500; ++k) {
        std::size_t n = 1 + k % 3;
        rng::Stream s(rng::stream_key(0xAC04, rng::Tag::Generic, k));
        Vec w(n);
        for (auto& x : w) x = -0.2 + 1.2 * s.next_u01();
        double l = (k % 10 == 0) ? 0.0 : 1.2 * s.next_u01();

        ProjectionResult pr = project_tail(w, l);
        Vec qg = oracles::grid_projection(w, l, 1e-3);
        worst_grid = std::max(worst_grid, max_abs_diff(pr.q, qg));

        double kkt = 0.0;
        double total = sum(pr.q);
        kkt = std::max(kkt, total - l);  // sum constraint
        kkt = std::max(kkt, -pr.nu);     // dual feasibility
        for (std::size_t i = 0; i < n; ++i) {
            kkt = std::max(kkt, -pr.q[i]); // primal feasibility
            if (pr.q[i] > 1e-12)
                kkt = std::max(kkt, std::abs(pr.q[i] - (w[i] - pr.nu / 2.0)));
            else
                kkt = std::max(kkt, w[i] - pr.nu / 2.0); // inactive coordinates
        }
        if (pr.nu > 1e-12) kkt = std::max(kkt, std::abs(total - l)); // slackness
        worst_kkt = std::max(worst_kkt, kkt);
    }
    bool pass = worst_grid <= 1e-3 + 1e-9 && worst_kkt <= 1e-9;
    return {pass, fmt("max |projection - grid oracle| = %.2e (limit 1e-3), "
                      "max KKT residual = %.2e (limit 1e-9) over 500 instances",
                      worst_grid, worst_kkt)};
}

// ------------------------------------------------------------ criterion 5

// Distributed-mode weight optimization lands within 1e-2 of centralized
// mode on M=40 geometric graphs, and both improve on the uniform design.
Outcome criterion_optimizer_agreement() {
    struct Shape { double r, v; };
    const Shape shapes[3] = {{2.0, 2.0}, {2.0, 6.0}, {2.0, 10.0}};
    double worst_gap = 0.0;
    bool improved = true;
    std::string per;
    for (std::size_t idx = 0; idx < 3; ++idx) {
        NetworkSpec spec = make_random_spec(40, shapes[idx].r, shapes[idx].v, 0xAC05 + idx);
        Matrix p = generate_geometric(spec);
        OptimizerConfig oc;
        oc.schedule = OptimizerConfig::StepSchedule::Constant;
        oc.step_size = 0.01;
        oc.outer_iterations = 10000;
        oc.inner.max_iterations = 1500;
        oc.inner.residual_tolerance = 1e-9;
        oc.seed = rng::stream_key(0xAC05, rng::Tag::EigenInit, idx);
        OptimizeResult cent = optimize_weights(p, oc, OptimizeMode::Centralized);
        OptimizeResult dist = optimize_weights(p, oc, OptimizeMode::Distributed);
        worst_gap = std::max(worst_gap, std::abs(cent.best_rho - dist.best_rho));
        improved = improved && dist.best_rho <= cent.initial_rho && cent.best_rho <= cent.initial_rho;
        per += fmt("%s[%zu] init %.4f cent %.4f dist %.4f", idx ? "; " : "", idx,
                   cent.initial_rho, cent.best_rho, dist.best_rho);
    }
    bool pass = worst_gap <= 1e-2 && improved;
    return {pass, fmt("max |centralized - distributed| best rho = %.2e (limit 1e-2); %s",
                      worst_gap, per.c_str())};
}

// ------------------------------------------------------------ criterion 6

// On the two-device 0.8-reliability link the optimizer reaches the analytic
// optimum: off-diagonal weight 0.625 and mixing rate 0.
Outcome criterion_closed_form_optimum() {
    Matrix p(2, 2, 0.0);
    p(0, 1) = p(1, 0) = 0.8;
    OptimizerConfig oc;
    oc.schedule = OptimizerConfig::StepSchedule::Constant;
    oc.step_size = 3e-7;
    oc.outer_iterations = 300000;
    oc.inner.max_iterations = 50;
    oc.inner.residual_tolerance = 1e-12;
    oc.seed = rng::stream_key(0xAC06, rng::Tag::EigenInit, 0);
    OptimizeResult r = optimize_weights(p, oc, OptimizeMode::Distributed);
    bool pass = std::abs(r.weights(0, 1) - 0.625) <= 1e-6 && r.best_rho <= 1e-6;
    return {pass, fmt("w01 = %.9f (target 0.625 within 1e-6), best rho = %.2e (limit 1e-6)",
                      r.weights(0, 1), r.best_rho)};
}

// ------------------------------------------------------------ criterion 7

// The convergence bound is strictly increasing in the mixing rate across a
// 10-point grid for 100 random parameter draws satisfying the stepsize
// precondition at every grid point.
Outcome criterion_bound_monotonic() {
    std::size_t violations = 0;
    for (std::size_t k = 0; k < 100; ++k) {
        rng::Stream s(rng::stream_key(0xAC07, rng::Tag::Generic, k));
        BoundParams bp;
        bp.devices = 1 + s.next_u64() % 64;
        bp.smoothness = 0.5 + 1.5 * s.next_u01();
        bp.noise_var = s.next_u01();
        bp.heterogeneity = s.next_u01();
        bp.initial_loss = 0.1 + 4.9 * s.next_u01();
        bp.optimal_loss = 0.0;
        bp.horizon = 100 + s.next_u64() % 9901;
        double limit = (1.0 - std::sqrt(0.9)) /
                       (6.0 * std::sqrt(static_cast<double>(bp.devices)) * bp.smoothness);
        bp.learning_rate = (0.2 + 0.75 * s.next_u01()) * limit;

        double prev = -1.0;
        for (int j = 0; j < 10; ++j) {
            bp.rho = 0.1 * j;
            if (!check_precondition(bp).holds) ++violations;
            double b = eval_bound(bp);
            if (!(b > prev)) ++violations;
            prev = b;
        }
    }
    return {violations == 0, fmt("%zu monotonicity/precondition violations over 100 draws "
                                 "x 10 grid points (required 0)", violations)};
}

// ------------------------------------------------------------ criterion 8

// Training on a label-skewed classification task degrades monotonically
// with the design's mixing rate: Spearman(rho, final loss) and
// Spearman(rho, final consensus error) at least 0.9 over 20 seeds, and the
// worst-device accuracy spreads wider than the average accuracy.
Outcome criterion_training_monotonic() {
    auto task = make_classification_task(40, 10, 10, 60, 1.0, 0xAC08);
    Matrix p = hollow_ones(40);
    const std::vector<double> rhos = {0.0, 0.3, 0.6, 0.9};
    std::vector<double> loss(4, 0.0), cons(4, 0.0), avg_acc(4, 0.0), min_acc(4, 0.0);
    for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
        Matrix w = testsupport::design_with_rho(40, rhos[ri]);
        for (std::size_t seed = 0; seed < 20; ++seed) {
            TrainConfig tc;
            tc.learning_rate = 0.05;
            tc.rounds = 150;
            tc.batch = 1;
            tc.seed = rng::stream_key(0xAC08, rng::Tag::Trial, seed);
            TrainResult tr = run_training(w, p, *task, tc);
            const RoundMetrics& last = tr.metrics.back();
            loss[ri] += last.global_loss / 20.0;
            cons[ri] += last.consensus_error / 20.0;
            avg_acc[ri] += last.avg_accuracy / 20.0;
            min_acc[ri] += last.min_accuracy / 20.0;
        }
    }
    double s_loss = testsupport::spearman(rhos, loss);
    double s_cons = testsupport::spearman(rhos, cons);
    auto spread = [](const std::vector<double>& v) {
        return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
    };
    double min_spread = spread(min_acc), avg_spread = spread(avg_acc);
    bool pass = s_loss >= 0.9 && s_cons >= 0.9 && min_spread > avg_spread;
    return {pass, fmt("Spearman(rho, loss) = %.2f, Spearman(rho, consensus) = %.2f "
                      "(minimum 0.9); worst-device accuracy spread %.3f vs average %.3f",
                      s_loss, s_cons, min_spread, avg_spread)};
}

// ------------------------------------------------------------ criterion 9

// With uniform weights and perfect links every device follows one shared
// trajectory equal to centralized mini-batch SGD within 1e-10 over 200
// rounds (homogeneous task, shared noise draws).
Outcome criterion_perfect_mixing() {
    auto task = make_quadratic_task(8, 6, 0.0, 0.5, 0xAC09, /*shared_noise=*/true);
    Matrix w = design_equal(8);
    Matrix p = hollow_ones(8);
    TrainConfig tc;
    tc.learning_rate = 0.1;
    tc.batch = 2;
    tc.rounds = 200;
    tc.seed = 0xAC09;
    Matrix ref = testsupport::centralized_sgd_trajectory(*task, tc.learning_rate, 200,
                                                         tc.batch, tc.seed);
    ModelMatrix st;
    st.x = Matrix(task->dimension(), task->devices(), 0.0);
    double worst_spread = 0.0, worst_dev = 0.0;
    for (std::size_t t = 0; t < 200; ++t) {
        Matrix s = sample_mask(p, tc.seed, t);
        st = dsgd_round(st, w, s, *task, tc);
        for (std::size_t i = 0; i < st.x.rows(); ++i) {
            for (std::size_t j = 1; j < st.x.cols(); ++j)
                worst_spread = std::max(worst_spread, std::abs(st.x(i, j) - st.x(i, 0)));
            worst_dev = std::max(worst_dev, std::abs(st.x(i, 0) - ref(t, i)));
        }
    }
    bool pass = worst_spread <= 1e-12 && worst_dev <= 1e-10;
    return {pass, fmt("max cross-device spread = %.2e (limit 1e-12), max deviation from "
                      "the centralized trajectory = %.2e (limit 1e-10)", worst_spread,
                      worst_dev)};
}

// ----------------------------------------------------------- criterion 10

// The closed-form bound on the subgradient deviation induced by an
// approximate eigenvector holds for 1000 random perturbations across 10
// weight/reliability instances, with zero violations.
Outcome criterion_inexactness_bound() {
    std::size_t violations = 0;
    double max_ratio = 0.0;
    for (std::size_t inst = 0; inst < 10; ++inst) {
        std::size_t m = 5 + inst % 8;
        Matrix w = testutil::random_weights(m, rng::stream_key(0xAC0A, rng::Tag::Generic, inst));
        Matrix p = testutil::random_symmetric_hollow(
            m, rng::stream_key(0xAC0A, rng::Tag::Perturb, inst));
        Matrix wbar = expected_mixing(w, p);
        Vec exact = spectral_summary(wbar).eigenvector;
        for (std::size_t k = 0; k < 100; ++k) {
            rng::Stream s(rng::stream_key(0xAC0A, rng::Tag::Perturb, inst, k + 1));
            double delta = std::pow(10.0, -4.0 + 4.0 * s.next_u01());
            Vec u = exact;
            for (auto& x : u) x += delta * s.next_normal();
            double mean = sum(u) / static_cast<double>(m);
            for (auto& x : u) x -= mean;
            double nrm = norm2(u);
            if (nrm < 1e-9) continue; // perturbation annihilated the vector
            scale(1.0 / nrm, u);
            try {
                InexactnessDiagnostics d = inexactness_check(p, u, exact);
                max_ratio = std::max(max_ratio, d.ratio);
            } catch (const Error&) {
                ++violations;
            }
        }
    }
    return {violations == 0, fmt("%zu bound violations over 1000 perturbations (required 0); "
                                 "max deviation/bound ratio = %.3f", violations, max_ratio)};
}

// ----------------------------------------------------------- criterion 11

// The Metropolis-style benchmark design is symmetric doubly stochastic to
// 1e-12 on 100 random reliability matrices, and never mixes faster than the
// optimized design on M=40 geometric instances.
Outcome criterion_benchmark_designs() {
    double worst_ds = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
        std::size_t m = 3 + k % 18;
        Matrix p = testutil::random_symmetric_hollow(m, rng::stream_key(0xAC0B, rng::Tag::Generic, k));
        rng::Stream zero(rng::stream_key(0xAC0B, rng::Tag::Perturb, k));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j)
                if (zero.next_u01() < 0.2) p(i, j) = p(j, i) = 0.0;
        // The design needs every device reachable; re-link any device the
        // sparsification isolated.
        for (std::size_t i = 0; i < m; ++i) {
            double degree = 0.0;
            for (std::size_t j = 0; j < m; ++j) degree += p(i, j);
            if (degree == 0.0) {
                std::size_t j = (i + 1) % m;
                p(i, j) = p(j, i) = 0.5;
            }
        }
        Matrix w = design_metropolis_hastings(p);
        for (std::size_t i = 0; i < m; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                row += w(i, j);
                worst_ds = std::max(worst_ds, std::abs(w(i, j) - w(j, i)));
                worst_ds = std::max(worst_ds, std::max(0.0, -w(i, j)));
            }
            worst_ds = std::max(worst_ds, std::abs(row - 1.0));
        }
    }

    struct Shape { double r, v; };
    const Shape shapes[4] = {{1.0, 2.0}, {2.0, 2.0}, {2.0, 6.0}, {1.5, 4.0}};
    double min_margin = 1e300;
    for (std::size_t idx = 0; idx < 4; ++idx) {
        NetworkSpec spec = make_random_spec(40, shapes[idx].r, shapes[idx].v, 0xAC0B + idx);
        Matrix p = generate_geometric(spec);
        double rho_mh = dense_rho(expected_mixing(design_metropolis_hastings(p), p));
        OptimizerConfig oc;
        oc.schedule = OptimizerConfig::StepSchedule::Constant;
        oc.step_size = 0.01;
        oc.outer_iterations = 3000;
        oc.seed = rng::stream_key(0xAC0B, rng::Tag::EigenInit, idx);
        OptimizeResult opt = optimize_weights(p, oc, OptimizeMode::Centralized);
        min_margin = std::min(min_margin, rho_mh - opt.best_rho);
    }
    bool pass = worst_ds <= 1e-12 && min_margin >= -1e-12;
    return {pass, fmt("max doubly-stochastic residual = %.2e (limit 1e-12); min "
                      "(benchmark rho - optimized rho) = %.4f (required >= 0)",
                      worst_ds, min_margin)};
}

// ----------------------------------------------------------- criterion 12

// Running the full pipeline twice with one fixed config reproduces every
// CSV (and JSON report) byte for byte.
Outcome criterion_determinism() {
    auto build = [](const std::string& dir) {
        Config c;
        c.set("seed", "7");
        c.set("output_dir", dir);
        c.set("trials", "3");
        c.set("network.devices", "10");
        c.set("network.decay_scale", "2.0");
        c.set("network.decay_exponent", "2.0");
        c.set("weights.design", "optimized-distributed");
        c.set("optimizer.iterations", "300");
        c.set("optimizer.step_size", "0.01");
        c.set("optimizer.diagnostics", "true");
        c.set("optimizer.inner.iterations", "500");
        c.set("optimizer.inner.tolerance", "1e-9");
        c.set("task.kind", "quadratic");
        c.set("task.dimension", "8");
        c.set("task.noise", "0.4");
        c.set("task.heterogeneity", "0.8");
        c.set("train.learning_rate", "0.05");
        c.set("train.rounds", "50");
        c.set("train.batch", "2");
        return c;
    };
    fs::path dir_a = fs::temp_directory_path() / "dflopt_acceptance_run_a";
    fs::path dir_b = fs::temp_directory_path() / "dflopt_acceptance_run_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    run_experiment(build(dir_a.string()));
    run_experiment(build(dir_b.string()));

    std::size_t missing = 0, differing = 0;
    for (const char* name : {kConfigEcho, kNetworkCsv, kWeightsCsv, kTraceCsv, kMetricsCsv,
                             kAggregateCsv, kBoundReport, kManifest}) {
        if (!fs::exists(dir_a / name) || !fs::exists(dir_b / name)) {
            ++missing;
            continue;
        }
        std::string a = csvio::read_file((dir_a / name).string());
        std::string b = csvio::read_file((dir_b / name).string());
        if (name == std::string(kConfigEcho)) continue; // echoes differ in output_dir only
        if (a != b) ++differing;
    }
    bool pass = missing == 0 && differing == 0;
    return {pass, fmt("%zu artifacts missing, %zu artifacts differ between the two runs "
                      "(required 0 and 0)", missing, differing)};
}

} // namespace

int main(int argc, char** argv) {
    using Fn = Outcome (*)();
    struct Criterion {
        const char* name;
        Fn fn;
    };
    const Criterion criteria[12] = {
        {"moment exactness", criterion_moment_exactness},
        {"Monte Carlo consistency", criterion_monte_carlo},
        {"distributed eigensolver accuracy", criterion_eigensolver},
        {"projection correctness", criterion_projection},
        {"distributed-vs-centralized agreement", criterion_optimizer_agreement},
        {"closed-form optimum", criterion_closed_form_optimum},
        {"bound monotonicity", criterion_bound_monotonic},
        {"training monotonicity in mixing rate", criterion_training_monotonic},
        {"perfect-mixing equivalence", criterion_perfect_mixing},
        {"inexact-subgradient bound", criterion_inexactness_bound},
        {"benchmark weight designs", criterion_benchmark_designs},
        {"pipeline determinism", criterion_determinism},
    };

    int only = 0;
    if (argc > 1) {
        only = std::atoi(argv[1]);
        if (only < 1 || only > 12) {
            std::fprintf(stderr, "usage: %s [criterion 1-12]\n", argv[0]);
            return 1;
        }
    }

    bool all_pass = true;
    for (int i = 1; i <= 12; ++i) {
        if (only != 0 && i != only) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i - 1].fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("unexpected exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d (%s): %s - %s [%.1fs]\n", i, criteria[i - 1].name,
                    o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
