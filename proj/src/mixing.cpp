#include "dflopt/mixing.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "dflopt/errors.hpp"
#include "dflopt/netgraph.hpp"

namespace dflopt {

namespace {

void require_same_square(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
        throw runtime_error(std::string(what) + ": dimension mismatch");
}

} // namespace

Matrix build_snapshot(const Matrix& w, const Matrix& s) {
    require_same_square(w, s, "build_snapshot");
    const std::size_t m = w.rows();
    Matrix out(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double off = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            double v = w(i, j) * s(i, j);
            out(i, j) = v;
            off += v;
        }
        out(i, i) = 1.0 - off;
    }
    return out;
}

Matrix expected_mixing(const Matrix& w, const Matrix& p) {
    require_same_square(w, p, "expected_mixing");
    const std::size_t m = w.rows();
    Matrix out(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double off = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            double v = w(i, j) * p(i, j);
            out(i, j) = v;
            off += v;
        }
        out(i, i) = 1.0 - off;
        if (out(i, i) < -1e-9 || out(i, i) > 1.0 + 1e-9)
            throw runtime_error("expected_mixing: diagonal outside [0,1]; "
                                "weight row exceeds its budget");
    }
    return out;
}

MixingMoments second_moment(const Matrix& w, const Matrix& p) {
    require_same_square(w, p, "second_moment");
    const std::size_t m = w.rows();
    MixingMoments mm;
    mm.first_moment = expected_mixing(w, p);

    // Variance part: off-diagonal 2 w_ij^2 (p_ij^2 - p_ij) <= 0, diagonal
    // 2 sum_k w_ki^2 (p_ki - p_ki^2) >= 0. Rows sum to zero.
    mm.variance_part = Matrix(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double diag = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            if (k == i) continue;
            double pk = p(k, i);
            double wk = w(k, i);
            diag += 2.0 * wk * wk * (pk - pk * pk);
        }
        mm.variance_part(i, i) = diag;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            double pij = p(i, j);
            double wij = w(i, j);
            mm.variance_part(i, j) = 2.0 * wij * wij * (pij * pij - pij);
        }
    }

    mm.second_moment = matmul(mm.first_moment, mm.first_moment) + mm.variance_part;
    return mm;
}

SpectralSummary spectral_summary(const Matrix& a) {
    validate_doubly_stochastic(a, 1e-9);
    const std::size_t m = a.rows();

    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> mapped(a.data(), m, m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.compute(mapped); // eigenvalues ascending
    if (solver.info() != Eigen::Success)
        throw runtime_error("spectral_summary: eigendecomposition failed");

    SpectralSummary out;
    out.lambda2 = solver.eigenvalues()(m - 2);
    out.lambda_min = solver.eigenvalues()(0);
    out.rho = std::max(0.0, std::max(out.lambda2, -out.lambda_min));
    out.contraction_violated = out.rho >= 1.0 - 1e-12;

    // Eigenvector attaining rho; ties go to the lambda_2 branch.
    Eigen::Index col = (out.lambda2 >= -out.lambda_min) ? Eigen::Index(m - 2) : 0;
    Vec v(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = solver.eigenvectors()(i, col);

    // Orthogonalize against the all-ones direction (guards degenerate
    // eigenspaces that mix in the constant vector), then normalize.
    double mean = sum(v) / static_cast<double>(m);
    for (auto& x : v) x -= mean;
    double nrm = norm2(v);
    if (nrm < 1e-14) {
        // Constant eigenvector (possible only when the eigenspace of rho
        // contains all-ones, e.g. the identity matrix): fall back to a
        // deterministic zero-sum direction.
        std::fill(v.begin(), v.end(), 0.0);
        v[0] = 1.0 / std::sqrt(2.0);
        v[1] = -1.0 / std::sqrt(2.0);
    } else {
        scale(1.0 / nrm, v);
    }

    // Deterministic sign: first component larger than 1e-12 in magnitude is
    // made positive.
    for (std::size_t i = 0; i < m; ++i) {
        if (std::fabs(v[i]) > 1e-12) {
            if (v[i] < 0.0) scale(-1.0, v);
            break;
        }
    }
    out.eigenvector = std::move(v);
    return out;
}

double dense_rho(const Matrix& a) {
    const std::size_t m = a.rows();
    if (m == 2) {
        // Eigenvalues of a 2x2 doubly stochastic matrix: 1 and 1 - 2*a01.
        return std::fabs(1.0 - 2.0 * a(0, 1));
    }
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> mapped(a.data(), m, m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.compute(mapped, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw runtime_error("dense_rho: eigendecomposition failed");
    return std::max(0.0, std::max(solver.eigenvalues()(m - 2), -solver.eigenvalues()(0)));
}

Matrix design_equal(std::size_t m) {
    if (m < 2) throw config_error("design_equal: need M >= 2");
    return Matrix::constant(m, m, 1.0 / static_cast<double>(m));
}

Matrix design_metropolis_hastings(const Matrix& p) {
    validate_reliability(p);
    const std::size_t m = p.rows();
    Vec degree = row_sums(p); // weighted degrees d_i
    for (std::size_t i = 0; i < m; ++i)
        if (degree[i] <= 0.0)
            throw config_error("metropolis-hastings design: device " +
                               std::to_string(i) + " is isolated (degree 0)");
    Matrix w(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double off = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            double v = p(i, j) / std::max(degree[i], degree[j]);
            w(i, j) = v;
            off += v;
        }
        w(i, i) = 1.0 - off;
    }
    return w;
}

void validate_weight_matrix(const Matrix& w, double tol) {
    validate_doubly_stochastic(w, tol);
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j)
            if (w(i, j) < -tol || w(i, j) > 1.0 + tol)
                throw runtime_error("weight matrix: entry outside [0,1]");
}

void validate_doubly_stochastic(const Matrix& a, double tol) {
    if (a.rows() != a.cols() || a.rows() < 2)
        throw runtime_error("doubly stochastic check: not a square matrix (M >= 2)");
    if (!is_symmetric(a, tol))
        throw runtime_error("doubly stochastic check: asymmetry beyond tolerance");
    for (double s : row_sums(a))
        if (std::fabs(s - 1.0) > tol)
            throw runtime_error("doubly stochastic check: row sum differs from 1");
}

} // namespace dflopt
