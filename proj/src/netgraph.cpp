#include "dflopt/netgraph.hpp"

#include <cmath>

#include "dflopt/errors.hpp"
#include "dflopt/rng.hpp"

namespace dflopt {

void validate_spec(const NetworkSpec& spec) {
    if (spec.devices < 2) throw config_error("network: need at least 2 devices");
    if (spec.placement.size() != spec.devices)
        throw config_error("network: placement count does not match device count");
    for (const auto& pt : spec.placement)
        if (pt[0] < 0.0 || pt[0] > 1.0 || pt[1] < 0.0 || pt[1] > 1.0)
            throw config_error("network: placement outside the unit square");
    if (spec.decay_scale < 0.0) throw config_error("network: decay_scale must be >= 0");
    if (spec.decay_exponent <= 0.0)
        throw config_error("network: decay_exponent must be > 0");
}

namespace {

std::vector<std::array<double, 2>> draw_placement(std::size_t devices,
                                                  std::uint64_t seed,
                                                  std::uint64_t round) {
    std::vector<std::array<double, 2>> pts(devices);
    for (std::size_t i = 0; i < devices; ++i) {
        rng::Stream s(rng::stream_key(seed, rng::Tag::Placement, round, i));
        pts[i] = {s.next_u01(), s.next_u01()};
    }
    return pts;
}

} // namespace

NetworkSpec make_random_spec(std::size_t devices, double decay_scale,
                             double decay_exponent, std::uint64_t seed) {
    NetworkSpec spec;
    spec.devices = devices;
    spec.decay_scale = decay_scale;
    spec.decay_exponent = decay_exponent;
    spec.seed = seed;
    spec.placement = draw_placement(devices, seed, 0);
    validate_spec(spec);
    return spec;
}

NetworkSpec perturb_placement(const NetworkSpec& spec, std::uint64_t round) {
    validate_spec(spec);
    NetworkSpec out = spec;
    out.placement = draw_placement(spec.devices, spec.seed, round);
    return out;
}

Matrix generate_geometric(const NetworkSpec& spec) {
    validate_spec(spec);
    const std::size_t m = spec.devices;
    Matrix p(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double dx = spec.placement[i][0] - spec.placement[j][0];
            double dy = spec.placement[i][1] - spec.placement[j][1];
            double d = std::sqrt(dx * dx + dy * dy);
            double pij = std::exp(-spec.decay_scale * std::pow(d, spec.decay_exponent));
            p(i, j) = pij;
            p(j, i) = pij;
        }
    }
    return p;
}

Matrix sample_mask(const Matrix& p, std::uint64_t seed, std::uint64_t round) {
    validate_reliability(p);
    const std::size_t m = p.rows();
    Matrix s(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            if (p(i, j) <= 0.0) continue;
            double u = rng::u01_at(seed, rng::Tag::LinkMask, round, i, j);
            if (u < p(i, j)) {
                s(i, j) = 1.0;
                s(j, i) = 1.0;
            }
        }
    }
    return s;
}

Matrix estimate_reliability(const std::vector<Matrix>& history) {
    if (history.empty()) throw runtime_error("estimate_reliability: empty history");
    const std::size_t m = history.front().rows();
    Matrix acc(m, m, 0.0);
    for (const auto& s : history) {
        if (s.rows() != m || s.cols() != m)
            throw runtime_error("estimate_reliability: inconsistent mask sizes");
        acc = acc + s;
    }
    acc = (1.0 / static_cast<double>(history.size())) * acc;
    for (std::size_t i = 0; i < m; ++i) acc(i, i) = 0.0;
    return acc;
}

namespace {

void validate_symmetric_hollow(const Matrix& a, const char* what) {
    if (a.rows() != a.cols()) throw runtime_error(std::string(what) + ": not square");
    if (a.rows() < 2) throw runtime_error(std::string(what) + ": need M >= 2");
    for (std::size_t i = 0; i < a.rows(); ++i) {
        if (a(i, i) != 0.0) throw runtime_error(std::string(what) + ": nonzero diagonal");
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (a(i, j) != a(j, i))
                throw runtime_error(std::string(what) + ": not symmetric");
    }
}

} // namespace

void validate_reliability(const Matrix& p) {
    validate_symmetric_hollow(p, "reliability matrix");
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < p.cols(); ++j)
            if (p(i, j) < 0.0 || p(i, j) > 1.0)
                throw runtime_error("reliability matrix: entry outside [0,1]");
}

void validate_mask(const Matrix& s) {
    validate_symmetric_hollow(s, "transmission mask");
    for (std::size_t i = 0; i < s.rows(); ++i)
        for (std::size_t j = 0; j < s.cols(); ++j)
            if (s(i, j) != 0.0 && s(i, j) != 1.0)
                throw runtime_error("transmission mask: entry not in {0,1}");
}

} // namespace dflopt
