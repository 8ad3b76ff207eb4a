#include "dflopt/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "dflopt/errors.hpp"
#include "dflopt/mixing.hpp"
#include "dflopt/netgraph.hpp"

namespace dflopt::oracles {

std::pair<Matrix, Matrix> exact_moments_by_enumeration(
    const Matrix& w, const Matrix& p, const EnumerationBudget& budget) {
    validate_reliability(p);
    const std::size_t m = w.rows();

    // Deterministic links (p in {0,1}) are fixed in the base mask; only
    // uncertain links are enumerated.
    std::vector<std::pair<std::size_t, std::size_t>> uncertain;
    Matrix base(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            if (p(i, j) == 1.0) {
                base(i, j) = base(j, i) = 1.0;
            } else if (p(i, j) > 0.0) {
                uncertain.emplace_back(i, j);
            }
        }
    }
    if (uncertain.size() > budget.max_pairs)
        throw runtime_error("moment enumeration: " + std::to_string(uncertain.size()) +
                            " uncertain links exceed the budget of " +
                            std::to_string(budget.max_pairs));

    Matrix first(m, m, 0.0), second(m, m, 0.0);
    const std::size_t masks = std::size_t(1) << uncertain.size();
    for (std::size_t bits = 0; bits < masks; ++bits) {
        Matrix s = base;
        double prob = 1.0;
        for (std::size_t k = 0; k < uncertain.size(); ++k) {
            auto [i, j] = uncertain[k];
            if (bits & (std::size_t(1) << k)) {
                s(i, j) = s(j, i) = 1.0;
                prob *= p(i, j);
            } else {
                prob *= 1.0 - p(i, j);
            }
        }
        Matrix snap = build_snapshot(w, s);
        first = first + prob * snap;
        second = second + prob * matmul(snap, snap);
    }
    return {first, second};
}

MomentEstimate mc_moments(const Matrix& w, const Matrix& p, std::size_t samples,
                          std::uint64_t seed) {
    if (samples < 1) throw runtime_error("mc_moments: need at least one sample");
    const std::size_t m = w.rows();
    const std::size_t n2 = m * m;

    Matrix mean1(m, m, 0.0), mean2(m, m, 0.0);
    Matrix sq1(m, m, 0.0), sq2(m, m, 0.0); // running sums of squares
    for (std::size_t t = 0; t < samples; ++t) {
        Matrix s = sample_mask(p, seed, t);
        Matrix snap = build_snapshot(w, s);
        Matrix snap2 = matmul(snap, snap);
        for (std::size_t e = 0; e < n2; ++e) {
            double a = snap.data()[e];
            double b = snap2.data()[e];
            mean1.data()[e] += a;
            mean2.data()[e] += b;
            sq1.data()[e] += a * a;
            sq2.data()[e] += b * b;
        }
    }

    MomentEstimate est;
    est.samples = samples;
    const double n = static_cast<double>(samples);
    est.first_moment = (1.0 / n) * mean1;
    est.second_moment = (1.0 / n) * mean2;
    est.first_se = Matrix(m, m, 0.0);
    est.second_se = Matrix(m, m, 0.0);
    if (samples > 1) {
        for (std::size_t e = 0; e < n2; ++e) {
            double v1 = (sq1.data()[e] / n - est.first_moment.data()[e] * est.first_moment.data()[e]) *
                        n / (n - 1.0);
            double v2 = (sq2.data()[e] / n - est.second_moment.data()[e] * est.second_moment.data()[e]) *
                        n / (n - 1.0);
            est.first_se.data()[e] = std::sqrt(std::max(0.0, v1) / n);
            est.second_se.data()[e] = std::sqrt(std::max(0.0, v2) / n);
        }
    }
    return est;
}

namespace {

double sq_dist(const Vec& q, const Vec& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        double d = q[i] - w[i];
        acc += d * d;
    }
    return acc;
}

// Exhaustive search of the axis-aligned grid {lo + k*step} intersected with
// the feasible set, for up to 3 dimensions.
Vec grid_search(const Vec& w, double l, const Vec& lo, const Vec& hi, double step) {
    const std::size_t m = w.size();
    std::vector<std::size_t> counts(m);
    for (std::size_t d = 0; d < m; ++d)
        counts[d] = static_cast<std::size_t>(std::floor((hi[d] - lo[d]) / step)) + 1;

    Vec best(m, 0.0);
    double best_val = sq_dist(best, w); // q = 0 is always feasible (l >= 0)
    Vec q(m, 0.0);
    std::vector<std::size_t> ix(m, 0);
    while (true) {
        double total = 0.0;
        for (std::size_t d = 0; d < m; ++d) {
            q[d] = std::max(0.0, lo[d] + step * static_cast<double>(ix[d]));
            total += q[d];
        }
        if (total <= l) {
            double val = sq_dist(q, w);
            if (val < best_val) {
                best_val = val;
                best = q;
            }
        }
        // odometer increment
        std::size_t d = 0;
        for (; d < m; ++d) {
            if (++ix[d] < counts[d]) break;
            ix[d] = 0;
        }
        if (d == m) break;
    }
    return best;
}

} // namespace

Vec grid_projection(const Vec& w_tail, double l, double resolution) {
    const std::size_t m = w_tail.size();
    if (m > 3) throw runtime_error("grid_projection: dimension above 3 is not enumerable");
    if (l < 0.0) throw runtime_error("grid_projection: negative budget is infeasible");
    if (resolution <= 0.0) throw runtime_error("grid_projection: resolution must be > 0");
    if (m == 0) return {};

    // Optimal coordinates satisfy 0 <= q_d <= max(0, w_d) and sum <= l.
    Vec lo(m, 0.0), hi(m);
    double points = 1.0;
    for (std::size_t d = 0; d < m; ++d) {
        hi[d] = std::min(std::max(0.0, w_tail[d]), l);
        points *= std::floor((hi[d] - lo[d]) / resolution) + 1.0;
    }

    if (points <= 2e7) return grid_search(w_tail, l, lo, hi, resolution);

    // Multiscale: exhaustive at a coarse step, then re-search a +-3-cell
    // window at 10x finer steps until the requested resolution. Valid here
    // because the objective is strictly convex and the feasible set convex.
    double step = resolution;
    double span = 0.0;
    for (std::size_t d = 0; d < m; ++d) span = std::max(span, hi[d] - lo[d]);
    while (std::pow(std::floor(span / step) + 1.0, static_cast<double>(m)) > 2e5)
        step *= 10.0;

    Vec center = grid_search(w_tail, l, lo, hi, step);
    while (step > resolution) {
        double prev = step;
        step = std::max(step / 10.0, resolution);
        Vec wlo(m), whi(m);
        for (std::size_t d = 0; d < m; ++d) {
            wlo[d] = std::max(0.0, center[d] - 2.0 * prev);
            whi[d] = std::min(hi[d], center[d] + 2.0 * prev);
        }
        center = grid_search(w_tail, l, wlo, whi, step);
    }
    return center;
}

Vec symmetric_eigenvalues(const Matrix& a) {
    if (a.rows() != a.cols()) throw runtime_error("symmetric_eigenvalues: not square");
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> mapped(a.data(), a.rows(), a.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.compute(mapped, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw runtime_error("symmetric_eigenvalues: decomposition failed");
    Vec out(a.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = solver.eigenvalues()(i);
    return out;
}

} // namespace dflopt::oracles
