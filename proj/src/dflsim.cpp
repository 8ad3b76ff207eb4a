#include "dflopt/dflsim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "dflopt/errors.hpp"
#include "dflopt/kernels.hpp"
#include "dflopt/mixing.hpp"
#include "dflopt/oracles.hpp"
#include "dflopt/rng.hpp"

namespace dflopt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vec column(const Matrix& x, std::size_t j) {
    Vec v(x.rows());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x(i, j);
    return v;
}

// Batch-averaged stochastic gradient of device i at round t: consecutive
// draw indices t*B .. t*B+B-1, so rounds never share draws.
Vec batched_gradient(const TrainTask& task, std::size_t i, const Vec& xi,
                     std::uint64_t seed, std::uint64_t t, std::size_t batch) {
    Vec g = task.stochastic_gradient(i, xi, seed, t * batch);
    for (std::size_t b = 1; b < batch; ++b)
        axpy(1.0, task.stochastic_gradient(i, xi, seed, t * batch + b), g);
    if (batch > 1) scale(1.0 / static_cast<double>(batch), g);
    return g;
}

RoundMetrics measure(const TrainTask& task, const Matrix& x, std::size_t round) {
    const std::size_t d = x.rows(), m = x.cols();
    RoundMetrics rm;
    rm.round = round;

    Vec xbar(d);
    for (std::size_t r = 0; r < d; ++r)
        xbar[r] = kern::ops().sum(x.row(r), m) / static_cast<double>(m);

    rm.global_loss = task.evaluate(xbar).loss;

    double ce = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
        const double* row = x.row(r);
        for (std::size_t i = 0; i < m; ++i) {
            double diff = xbar[r] - row[i];
            ce += diff * diff;
        }
    }
    rm.consensus_error = ce / static_cast<double>(m);

    Vec gbar(d, 0.0);
    for (std::size_t i = 0; i < m; ++i) axpy(1.0, task.full_local_gradient(i, xbar), gbar);
    scale(1.0 / static_cast<double>(m), gbar);
    rm.grad_norm_sq = kern::ops().nrm2sq(gbar.data(), d);

    if (task.has_accuracy()) {
        double asum = 0.0, amin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            double a = task.accuracy(column(x, i));
            asum += a;
            amin = std::min(amin, a);
        }
        rm.avg_accuracy = asum / static_cast<double>(m);
        rm.min_accuracy = amin;
    } else {
        rm.avg_accuracy = kNaN;
        rm.min_accuracy = kNaN;
    }
    return rm;
}

} // namespace

double TrainTask::accuracy(const Vec&) const { return kNaN; }

ModelMatrix dsgd_round(const ModelMatrix& state, const Matrix& w, const Matrix& s,
                       const TrainTask& task, const TrainConfig& cfg) {
    const std::size_t d = task.dimension(), m = task.devices();
    if (state.x.rows() != d || state.x.cols() != m)
        throw runtime_error("dsgd_round: model matrix does not match the task");
    if (w.rows() != m || w.cols() != m || s.rows() != m || s.cols() != m)
        throw runtime_error("dsgd_round: weight/mask size does not match the task");
    if (cfg.batch < 1) throw config_error("dsgd_round: batch size must be >= 1");

    Matrix what = build_snapshot(w, s);
    Matrix mixed(d, m);
    kern::ops().gemm(state.x.data(), what.data(), mixed.data(), d, m, m);

    const Matrix& grad_at = cfg.post_mixing_gradient ? mixed : state.x;
    Matrix g(d, m);
    for (std::size_t i = 0; i < m; ++i) {
        Vec gi = batched_gradient(task, i, column(grad_at, i), cfg.seed, state.round,
                                  cfg.batch);
        if (gi.size() != d) throw runtime_error("dsgd_round: gradient dimension mismatch");
        for (std::size_t r = 0; r < d; ++r) {
            if (!std::isfinite(gi[r]))
                throw runtime_error("dsgd_round: non-finite stochastic gradient");
            g(r, i) = gi[r];
        }
    }

    ModelMatrix out;
    out.x = mixed - cfg.learning_rate * g;
    out.round = state.round + 1;
    return out;
}

TrainResult run_training(const Matrix& w0, const Matrix& p0, const TrainTask& task,
                         const TrainConfig& cfg) {
    const std::size_t d = task.dimension(), m = task.devices();
    if (cfg.learning_rate <= 0.0)
        throw config_error("run_training: learning rate must be > 0");
    if (cfg.batch < 1) throw config_error("run_training: batch size must be >= 1");
    validate_weight_matrix(w0);
    validate_reliability(p0);
    if (w0.rows() != m || p0.rows() != m)
        throw config_error("run_training: weight/reliability size does not match the task");
    const bool dynamic = cfg.scenario == TrainConfig::Scenario::Dynamic;
    if (dynamic) {
        validate_spec(cfg.network);
        if (cfg.network.devices != m)
            throw config_error("run_training: dynamic network size does not match the task");
        if (cfg.reopt_interval < 1)
            throw config_error("run_training: re-optimization interval must be >= 1");
    }

    ModelMatrix state;
    if (cfg.initial_models.empty()) {
        state.x = Matrix(d, m, 0.0);
    } else {
        if (cfg.initial_models.rows() != d || cfg.initial_models.cols() != m)
            throw config_error("run_training: initial models have the wrong shape");
        state.x = cfg.initial_models;
    }

    Matrix w = w0;
    Matrix p = p0;
    TrainResult out;
    out.metrics.reserve(cfg.rounds);

    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        if (dynamic) {
            p = generate_geometric(perturb_placement(cfg.network, t));
            if (t % cfg.reopt_interval == 0) {
                OptimizerConfig oc = cfg.reopt;
                oc.initial_weights = w; // warm start from the current design
                oc.seed = rng::stream_key(cfg.seed, rng::Tag::Trial, t);
                w = optimize_weights(p, oc, cfg.reopt_mode).weights;
            }
        }
        Matrix s = sample_mask(p, cfg.seed, t);
        state = dsgd_round(state, w, s, task, cfg);
        out.metrics.push_back(measure(task, state.x, t));
    }

    out.final_models = std::move(state);
    out.final_weights = std::move(w);
    return out;
}

// ---------------------------------------------------------------------------
// Least-squares task

std::shared_ptr<QuadraticTask> make_quadratic_task(std::size_t m, std::size_t d,
                                                   double beta_target, double alpha_target,
                                                   std::uint64_t seed, bool shared_noise) {
    if (m < 1 || d < 1) throw config_error("quadratic task: need M >= 1 and D >= 1");
    if (beta_target < 0.0 || alpha_target < 0.0)
        throw config_error("quadratic task: variance targets must be >= 0");
    if (m == 1 && beta_target > 0.0)
        throw config_error("quadratic task: a single device cannot be heterogeneous");

    auto task = std::shared_ptr<QuadraticTask>(new QuadraticTask());
    task->m_ = m;
    task->d_ = d;
    task->alpha_sq_ = alpha_target * alpha_target;
    task->beta_sq_ = beta_target * beta_target;
    task->shared_noise_ = shared_noise;
    task->noise_key_ = seed;

    // Design matrix: identity plus a symmetric bump scaled by its own
    // spectral norm, so the singular values stay inside [0.75, 1.25].
    rng::Stream ds(rng::stream_key(seed, rng::Tag::TaskData, 0));
    Matrix r(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) r(i, j) = ds.next_normal();
    Matrix sym = 0.5 * (r + transpose(r));
    Vec ev = oracles::symmetric_eigenvalues(sym);
    double snorm = std::max(std::fabs(ev.front()), std::fabs(ev.back()));
    Matrix a = Matrix::identity(d);
    if (snorm > 0.0) a = a + (0.25 / snorm) * sym;
    task->a_ = a;
    task->ata_ = matmul(transpose(a), a);
    task->smoothness_ = oracles::symmetric_eigenvalues(task->ata_).back();

    // Targets: common center plus centered offsets rescaled so the
    // inter-device gradient divergence is exactly the requested beta^2.
    rng::Stream ts(rng::stream_key(seed, rng::Tag::TaskData, 1));
    Vec b0(d);
    for (auto& v : b0) v = ts.next_normal();
    std::vector<Vec> offs(m, Vec(d, 0.0));
    if (beta_target > 0.0) {
        Vec mean(d, 0.0);
        for (auto& u : offs) {
            for (auto& v : u) v = ts.next_normal();
            axpy(1.0, u, mean);
        }
        scale(1.0 / static_cast<double>(m), mean);
        Matrix at = transpose(a);
        double h = 0.0;
        for (auto& u : offs) {
            axpy(-1.0, mean, u);
            Vec atu = matvec(at, u);
            h += kern::ops().nrm2sq(atu.data(), d);
        }
        h /= static_cast<double>(m);
        if (h <= 0.0)
            throw runtime_error("quadratic task: degenerate offsets, cannot calibrate");
        double scale_factor = beta_target / std::sqrt(h);
        for (auto& u : offs) scale(scale_factor, u);
    }
    task->b_.resize(m);
    task->atb_.resize(m);
    Matrix at = transpose(a);
    for (std::size_t i = 0; i < m; ++i) {
        task->b_[i] = b0;
        axpy(1.0, offs[i], task->b_[i]);
        task->atb_[i] = matvec(at, task->b_[i]);
    }

    // Global optimum: A x = mean(b); the residual there is the spread of the
    // targets around their mean.
    Vec bbar(d, 0.0);
    for (const auto& b : task->b_) axpy(1.0, b, bbar);
    scale(1.0 / static_cast<double>(m), bbar);
    using Emat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Emat> am(a.data(), static_cast<Eigen::Index>(d),
                              static_cast<Eigen::Index>(d));
    Eigen::Map<const Eigen::VectorXd> bm(bbar.data(), static_cast<Eigen::Index>(d));
    Eigen::VectorXd xs = am.partialPivLu().solve(bm);
    task->optimum_.assign(xs.data(), xs.data() + d);
    double spread = 0.0;
    for (const auto& b : task->b_) {
        Vec diff = b;
        axpy(-1.0, bbar, diff);
        spread += kern::ops().nrm2sq(diff.data(), d);
    }
    task->optimal_loss_ = spread / (2.0 * static_cast<double>(m));
    return task;
}

double QuadraticTask::local_loss(std::size_t i, const Vec& x) const {
    Vec res = matvec(a_, x);
    axpy(-1.0, b_[i], res);
    return 0.5 * kern::ops().nrm2sq(res.data(), d_);
}

Vec QuadraticTask::full_local_gradient(std::size_t i, const Vec& x) const {
    Vec g = matvec(ata_, x);
    axpy(-1.0, atb_[i], g);
    return g;
}

Vec QuadraticTask::stochastic_gradient(std::size_t i, const Vec& x, std::uint64_t seed,
                                       std::uint64_t t) const {
    Vec g = full_local_gradient(i, x);
    if (alpha_sq_ > 0.0) {
        rng::Stream ns(rng::stream_key(seed, rng::Tag::GradNoise, t,
                                       shared_noise_ ? 0 : i + 1, noise_key_));
        double sigma = std::sqrt(alpha_sq_ / static_cast<double>(d_));
        for (auto& v : g) v += sigma * ns.next_normal();
    }
    return g;
}

EvalMetrics QuadraticTask::evaluate(const Vec& x) const {
    Vec ax = matvec(a_, x);
    double total = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
        Vec res = ax;
        axpy(-1.0, b_[i], res);
        total += 0.5 * kern::ops().nrm2sq(res.data(), d_);
    }
    return {total / static_cast<double>(m_), kNaN};
}

// ---------------------------------------------------------------------------
// Gaussian-cluster softmax classification task

namespace {

constexpr std::size_t kHoldoutSamples = 400;
constexpr double kCenterRadius = 3.0;

void fill_sample(rng::Stream& s, const Matrix& centers, std::size_t label,
                 double* row, std::size_t features) {
    for (std::size_t k = 0; k < features; ++k)
        row[k] = centers(label, k) + s.next_normal();
    row[features] = 1.0; // folded bias
}

} // namespace

std::shared_ptr<ClassificationTask> make_classification_task(
    std::size_t m, std::size_t classes, std::size_t features,
    std::size_t samples_per_device, double label_skew, std::uint64_t seed) {
    if (m < 1 || classes < 2 || features < 1 || samples_per_device < 1)
        throw config_error("classification task: sizes must be positive (>= 2 classes)");
    if (label_skew < 0.0 || label_skew > 1.0)
        throw config_error("classification task: label skew must be in [0, 1]");

    auto task = std::shared_ptr<ClassificationTask>(new ClassificationTask());
    task->m_ = m;
    task->classes_ = classes;
    task->features_ = features;
    task->per_device_ = samples_per_device;
    task->dim_ = classes * (features + 1);

    // Cluster centers on a sphere of fixed radius: separable but with
    // overlapping unit-variance clouds.
    task->centers_ = Matrix(classes, features);
    for (std::size_t c = 0; c < classes; ++c) {
        rng::Stream cs(rng::stream_key(seed, rng::Tag::TaskData, 0, c));
        double* row = task->centers_.row(c);
        for (std::size_t k = 0; k < features; ++k) row[k] = cs.next_normal();
        double nrm = std::sqrt(kern::ops().nrm2sq(row, features));
        if (nrm < 1e-12) {
            row[0] = kCenterRadius;
        } else {
            kern::ops().scal(kCenterRadius / nrm, row, features);
        }
    }

    task->data_.resize(m);
    task->labels_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        rng::Stream ds(rng::stream_key(seed, rng::Tag::TaskData, 1, i));
        std::size_t own = i * classes / m; // contiguous device groups per class
        task->data_[i] = Matrix(samples_per_device, features + 1);
        task->labels_[i].resize(samples_per_device);
        for (std::size_t sidx = 0; sidx < samples_per_device; ++sidx) {
            std::size_t lab =
                ds.next_u01() < label_skew ? own : ds.next_u64() % classes;
            task->labels_[i][sidx] = lab;
            fill_sample(ds, task->centers_, lab, task->data_[i].row(sidx), features);
        }
    }

    // One class-balanced held-out set shared by every device.
    rng::Stream hs(rng::stream_key(seed, rng::Tag::Holdout));
    task->holdout_ = Matrix(kHoldoutSamples, features + 1);
    task->holdout_labels_.resize(kHoldoutSamples);
    for (std::size_t sidx = 0; sidx < kHoldoutSamples; ++sidx) {
        std::size_t lab = sidx % classes;
        task->holdout_labels_[sidx] = lab;
        fill_sample(hs, task->centers_, lab, task->holdout_.row(sidx), features);
    }
    return task;
}

double ClassificationTask::sample_loss(std::size_t i, std::size_t idx, const Vec& x) const {
    const double* feat = data_[i].row(idx);
    const std::size_t fw = features_ + 1;
    double mx = -std::numeric_limits<double>::infinity();
    Vec logits(classes_);
    for (std::size_t c = 0; c < classes_; ++c) {
        logits[c] = kern::ops().dot(x.data() + c * fw, feat, fw);
        mx = std::max(mx, logits[c]);
    }
    double lse = 0.0;
    for (std::size_t c = 0; c < classes_; ++c) lse += std::exp(logits[c] - mx);
    return std::log(lse) + mx - logits[labels_[i][idx]];
}

void ClassificationTask::sample_grad_accum(std::size_t i, std::size_t idx, const Vec& x,
                                           Vec& g) const {
    const double* feat = data_[i].row(idx);
    const std::size_t fw = features_ + 1;
    Vec logits(classes_);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes_; ++c) {
        logits[c] = kern::ops().dot(x.data() + c * fw, feat, fw);
        mx = std::max(mx, logits[c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < classes_; ++c) {
        logits[c] = std::exp(logits[c] - mx);
        z += logits[c];
    }
    const std::size_t y = labels_[i][idx];
    for (std::size_t c = 0; c < classes_; ++c) {
        double coeff = logits[c] / z - (c == y ? 1.0 : 0.0);
        kern::ops().axpy(coeff, feat, g.data() + c * fw, fw);
    }
}

double ClassificationTask::local_loss(std::size_t i, const Vec& x) const {
    double total = 0.0;
    for (std::size_t sidx = 0; sidx < per_device_; ++sidx)
        total += sample_loss(i, sidx, x);
    return total / static_cast<double>(per_device_) +
           0.5 * ridge_ * kern::ops().nrm2sq(x.data(), dim_);
}

Vec ClassificationTask::full_local_gradient(std::size_t i, const Vec& x) const {
    Vec g(dim_, 0.0);
    for (std::size_t sidx = 0; sidx < per_device_; ++sidx) sample_grad_accum(i, sidx, x, g);
    scale(1.0 / static_cast<double>(per_device_), g);
    axpy(ridge_, x, g);
    return g;
}

Vec ClassificationTask::stochastic_gradient(std::size_t i, const Vec& x, std::uint64_t seed,
                                            std::uint64_t t) const {
    rng::Stream bs(rng::stream_key(seed, rng::Tag::Batch, t, i));
    std::size_t idx = static_cast<std::size_t>(bs.next_u64() % per_device_);
    Vec g(dim_, 0.0);
    sample_grad_accum(i, idx, x, g);
    axpy(ridge_, x, g);
    return g;
}

double ClassificationTask::draw_loss(std::size_t i, const Vec& x, std::uint64_t seed,
                                     std::uint64_t t) const {
    rng::Stream bs(rng::stream_key(seed, rng::Tag::Batch, t, i));
    std::size_t idx = static_cast<std::size_t>(bs.next_u64() % per_device_);
    return sample_loss(i, idx, x) + 0.5 * ridge_ * kern::ops().nrm2sq(x.data(), dim_);
}

std::size_t ClassificationTask::predict(const double* feat, const Vec& x) const {
    const std::size_t fw = features_ + 1;
    std::size_t best = 0;
    double best_logit = kern::ops().dot(x.data(), feat, fw);
    for (std::size_t c = 1; c < classes_; ++c) {
        double l = kern::ops().dot(x.data() + c * fw, feat, fw);
        if (l > best_logit) {
            best_logit = l;
            best = c;
        }
    }
    return best;
}

double ClassificationTask::accuracy(const Vec& x) const {
    std::size_t correct = 0;
    for (std::size_t sidx = 0; sidx < holdout_labels_.size(); ++sidx)
        if (predict(holdout_.row(sidx), x) == holdout_labels_[sidx]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(holdout_labels_.size());
}

EvalMetrics ClassificationTask::evaluate(const Vec& x) const {
    double total = 0.0;
    for (std::size_t i = 0; i < m_; ++i) total += local_loss(i, x);
    return {total / static_cast<double>(m_), accuracy(x)};
}

std::vector<std::size_t> ClassificationTask::label_histogram(std::size_t i) const {
    std::vector<std::size_t> hist(classes_, 0);
    for (std::size_t lab : labels_.at(i)) ++hist[lab];
    return hist;
}

} // namespace dflopt
