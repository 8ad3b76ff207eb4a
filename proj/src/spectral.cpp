#include "dflopt/spectral.hpp"

#include <cmath>

#include "dflopt/errors.hpp"
#include "dflopt/kernels.hpp"
#include "dflopt/mixing.hpp"
#include "dflopt/rng.hpp"

namespace dflopt {

namespace {

// Per-device local state: the device's own matrix row in neighbor-list form.
// The gather over `neighbor_index` is the message exchange — a device reads
// exactly the scalars of peers with nonzero weight toward it.
struct DeviceRow {
    double self_weight = 0.0;
    std::vector<std::int32_t> neighbor_index;
    std::vector<double> neighbor_weight;
};

struct Network {
    std::vector<DeviceRow> rows;
    std::size_t size() const { return rows.size(); }
};

Network build_network(const Matrix& wbar) {
    Network net;
    const std::size_t m = wbar.rows();
    net.rows.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        DeviceRow& row = net.rows[i];
        row.self_weight = wbar(i, i);
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i || wbar(i, j) == 0.0) continue;
            row.neighbor_index.push_back(static_cast<std::int32_t>(j));
            row.neighbor_weight.push_back(wbar(i, j));
        }
    }
    return net;
}

// One synchronous exchange: out_i = wbar_ii * in_i + sum_j wbar_ij * in_j.
// The read set is static (the neighbor lists), so the audit only needs to be
// recorded once; later sweeps perform the identical reads.
void exchange(const Network& net, const Vec& in, Vec& out, AccessAudit* audit) {
    const auto& k = kern::ops();
    for (std::size_t i = 0; i < net.size(); ++i) {
        const DeviceRow& row = net.rows[i];
        out[i] = row.self_weight * in[i] +
                 k.gather_dot(row.neighbor_weight.data(), row.neighbor_index.data(),
                              row.neighbor_index.size(), in.data());
        if (audit)
            for (std::int32_t j : row.neighbor_index)
                audit->reads[i][static_cast<std::size_t>(j)] = 1;
    }
}

// Per-device estimates of the mean of `values`, by gossip: repeated
// neighbor exchange converges each device's scalar to the average.
Vec gossip_mean(const Network& net, const Vec& values, std::size_t rounds,
                AccessAudit* audit) {
    Vec cur = values, next(values.size());
    for (std::size_t r = 0; r < rounds; ++r) {
        exchange(net, cur, next, r == 0 ? audit : nullptr);
        std::swap(cur, next);
    }
    return cur;
}

} // namespace

EigenResult orthogonal_iteration(const Matrix& wbar, const IterationConfig& cfg,
                                 std::uint64_t seed, AccessAudit* audit) {
    validate_doubly_stochastic(wbar, 1e-9);
    const std::size_t m = wbar.rows();
    if (cfg.max_iterations < 1)
        throw config_error("orthogonal_iteration: max_iterations must be >= 1");

    Network net = build_network(wbar);
    if (audit) {
        audit->reads.assign(m, std::vector<std::uint8_t>(m, 0));
        audit->used_global_reduce = cfg.normalization == IterationConfig::Normalization::ExactReduce;
    }

    const bool exact = cfg.normalization == IterationConfig::Normalization::ExactReduce;
    const double inv_m = 1.0 / static_cast<double>(m);
    const auto& k = kern::ops();

    // Deflate the all-ones direction and normalize, through the configured
    // channel. Returns false when the centered iterate has vanished.
    auto center_and_normalize = [&](Vec& v) -> bool {
        if (exact) {
            double mean = k.sum(v.data(), m) * inv_m;
            for (auto& x : v) x -= mean;
            double nrm = std::sqrt(k.nrm2sq(v.data(), m));
            if (nrm < 1e-14) return false;
            k.scal(1.0 / nrm, v.data(), m);
            return true;
        }
        // Gossip: per-device mean estimates, then per-device norm estimates
        // of the centered vector (norm^2 = M * mean of squares).
        Vec mean = gossip_mean(net, v, cfg.gossip_rounds, audit);
        for (std::size_t i = 0; i < m; ++i) v[i] -= mean[i];
        Vec sq(m);
        for (std::size_t i = 0; i < m; ++i) sq[i] = v[i] * v[i];
        Vec msq = gossip_mean(net, sq, cfg.gossip_rounds, audit);
        bool alive = false;
        for (std::size_t i = 0; i < m; ++i) {
            double nrm = std::sqrt(std::max(0.0, msq[i] * static_cast<double>(m)));
            if (nrm < 1e-14) { v[i] = 0.0; continue; }
            v[i] /= nrm;
            alive = true;
        }
        return alive;
    };

    EigenResult res;

    // Random start: one standard-normal scalar per device.
    Vec v(m);
    for (std::size_t i = 0; i < m; ++i)
        v[i] = rng::Stream(rng::stream_key(seed, rng::Tag::EigenInit, i)).next_normal();
    if (!center_and_normalize(v)) {
        // Measure-zero event (constant start vector); still handled.
        res.eigenvector = Vec(m, 0.0);
        res.degenerate = true;
        return res;
    }

    Vec y(m);
    exchange(net, v, y, audit);

    // Observer diagnostics: Rayleigh quotient and eigen-residual of the
    // current iterate (used for stopping and reporting, not device state).
    auto diagnose = [&](const Vec& vv, const Vec& yy) {
        res.rayleigh = k.dot(vv.data(), yy.data(), m);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double d = yy[i] - res.rayleigh * vv[i];
            acc += d * d;
        }
        res.residual = std::sqrt(acc);
    };
    diagnose(v, y);

    std::size_t used = 0;
    while (used < cfg.max_iterations && res.residual > cfg.residual_tolerance) {
        v = y;
        if (!center_and_normalize(v)) {
            res.eigenvector = std::move(v);
            res.degenerate = true;
            res.rho_estimate = 0.0;
            res.rayleigh = 0.0;
            res.residual = 0.0;
            res.iterations_used = used + 1;
            return res;
        }
        exchange(net, v, y, nullptr); // same read set as the first exchange
        diagnose(v, y);
        ++used;
    }

    // Deterministic sign: first component of nonnegligible size is positive.
    for (std::size_t i = 0; i < m; ++i) {
        if (std::fabs(v[i]) > 1e-12) {
            if (v[i] < 0.0)
                for (auto& x : v) x = -x;
            break;
        }
    }

    res.eigenvector = std::move(v);
    res.rho_estimate = std::fabs(res.rayleigh);
    res.iterations_used = used;
    res.epsilon_estimate = res.residual * res.residual;
    return res;
}

AuditSummary audit_report(const AccessAudit& audit, const Matrix& wbar) {
    const std::size_t m = wbar.rows();
    if (audit.reads.size() != m)
        throw runtime_error("audit_report: audit size does not match matrix");
    AuditSummary summary;
    summary.used_global_reduce = audit.used_global_reduce;
    summary.peers_read_per_device.resize(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (!audit.reads[i][j]) continue;
            if (j == i || wbar(i, j) == 0.0)
                throw verification_error(
                    "locality violation: device " + std::to_string(i) +
                    " read device " + std::to_string(j) + " without a link");
            ++summary.peers_read_per_device[i];
        }
    }
    return summary;
}

} // namespace dflopt
