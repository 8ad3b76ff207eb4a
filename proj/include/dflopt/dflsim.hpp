#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "dflopt/matrix.hpp"
#include "dflopt/netgraph.hpp"
#include "dflopt/weightopt.hpp"

// Round-based decentralized SGD over unreliable links: every round samples a
// transmission mask, mixes the device models with the realized mixing matrix,
// and takes a local stochastic gradient step. Training tasks are pluggable;
// two synthetic families (least squares, Gaussian-cluster softmax
// classification) ship with the library.

namespace dflopt {

// Column i holds device i's model.
struct ModelMatrix {
    Matrix x;                // D x M
    std::uint64_t round = 0; // t
};

struct EvalMetrics {
    double loss = 0.0;
    double accuracy = 0.0; // NaN for tasks without an accuracy notion
};

class TrainTask {
public:
    virtual ~TrainTask() = default;

    virtual std::size_t devices() const = 0;   // M
    virtual std::size_t dimension() const = 0; // D

    virtual double local_loss(std::size_t i, const Vec& x) const = 0;
    // One stochastic draw, deterministic in (seed, t, i) and unbiased for
    // full_local_gradient. Mini-batches are averaged by the caller over
    // consecutive draw indices.
    virtual Vec stochastic_gradient(std::size_t i, const Vec& x, std::uint64_t seed,
                                    std::uint64_t t) const = 0;
    virtual Vec full_local_gradient(std::size_t i, const Vec& x) const = 0;

    // Objective value averaged over devices, plus held-out accuracy when the
    // task defines one (NaN otherwise).
    virtual EvalMetrics evaluate(const Vec& x) const = 0;
    // Held-out accuracy alone (cheaper than evaluate for per-device metrics).
    virtual double accuracy(const Vec& x) const;
    virtual bool has_accuracy() const { return false; }
};

struct TrainConfig {
    double learning_rate = 0.01; // lambda
    std::size_t rounds = 100;    // T
    std::size_t batch = 1;       // stochastic draws averaged per step
    enum class Scenario { Static, Dynamic };
    Scenario scenario = Scenario::Static;
    std::uint64_t seed = 0; // drives masks, sample draws, and gradient noise

    // Ablation: evaluate gradients at the aggregated models instead of the
    // pre-mixing ones. Off by default: the analyzed recursion steps from the
    // pre-mixing iterate.
    bool post_mixing_gradient = false;

    Matrix initial_models; // D x M; empty = all zeros

    // Dynamic scenario: placements are re-drawn every round from `network`,
    // the reliability matrix is recomputed, and the weights re-optimized
    // every `reopt_interval` rounds, warm-started from the current weights.
    NetworkSpec network;
    std::size_t reopt_interval = 1;
    OptimizerConfig reopt;
    OptimizeMode reopt_mode = OptimizeMode::Centralized;
};

struct RoundMetrics {
    std::size_t round = 0;
    double global_loss = 0.0;      // f at the model average
    double consensus_error = 0.0;  // (1/M) sum_i ||xbar - x_i||^2
    double grad_norm_sq = 0.0;     // ||grad f(xbar)||^2
    double avg_accuracy = 0.0;     // mean per-device held-out accuracy (NaN w/o accuracy)
    double min_accuracy = 0.0;     // worst device (NaN w/o accuracy)
};

struct TrainResult {
    std::vector<RoundMetrics> metrics; // one entry per round
    ModelMatrix final_models;
    Matrix final_weights; // differs from the input only in the dynamic scenario
};

// One round: X <- X Whut - lambda G, with Whut = build_snapshot(w, s) and G's
// column i the batch-averaged stochastic gradient at device i's pre-mixing
// model (post-mixing when the ablation flag is set).
ModelMatrix dsgd_round(const ModelMatrix& x, const Matrix& w, const Matrix& s,
                       const TrainTask& task, const TrainConfig& cfg);

// Full training loop: per round sample a mask, apply dsgd_round, and record
// metrics of the post-update state (metrics row t describes X^(t+1)).
TrainResult run_training(const Matrix& w, const Matrix& p, const TrainTask& task,
                         const TrainConfig& cfg);

// Least-squares task f_i(x) = 0.5 ||A x - b_i||^2 with one well-conditioned
// design matrix shared by all devices: the inter-device gradient divergence
// (1/M) sum_i ||grad f_i - grad f||^2 is then constant in x and calibrated to
// exactly beta_target^2 by construction. Stochastic gradients add zero-mean
// Gaussian noise with total variance alpha_target^2 (alpha_target^2 / D per
// coordinate); with shared_noise every device reuses the round's draw, which
// makes a uniform-weights perfect-network run collapse to one centralized
// trajectory.
class QuadraticTask;
std::shared_ptr<QuadraticTask> make_quadratic_task(std::size_t m, std::size_t d,
                                                   double beta_target, double alpha_target,
                                                   std::uint64_t seed,
                                                   bool shared_noise = false);

class QuadraticTask : public TrainTask {
public:
    std::size_t devices() const override { return m_; }
    std::size_t dimension() const override { return d_; }
    double local_loss(std::size_t i, const Vec& x) const override;
    Vec stochastic_gradient(std::size_t i, const Vec& x, std::uint64_t seed,
                            std::uint64_t t) const override;
    Vec full_local_gradient(std::size_t i, const Vec& x) const override;
    EvalMetrics evaluate(const Vec& x) const override;

    const Vec& optimum() const { return optimum_; } // argmin of the average objective
    double optimal_loss() const { return optimal_loss_; }
    double smoothness() const { return smoothness_; } // largest eigenvalue of A'A
    double noise_var() const { return alpha_sq_; }    // alpha^2
    double heterogeneity() const { return beta_sq_; } // beta^2, exact

private:
    friend std::shared_ptr<QuadraticTask> make_quadratic_task(std::size_t, std::size_t,
                                                              double, double,
                                                              std::uint64_t, bool);
    QuadraticTask() = default;

    std::size_t m_ = 0, d_ = 0;
    Matrix a_;                 // D x D design, shared
    Matrix ata_;               // A'A
    std::vector<Vec> b_;       // per-device targets
    std::vector<Vec> atb_;     // A'b_i
    Vec optimum_;
    double optimal_loss_ = 0.0;
    double smoothness_ = 0.0;
    double alpha_sq_ = 0.0;
    double beta_sq_ = 0.0;
    bool shared_noise_ = false;
    std::uint64_t noise_key_ = 0; // task-level key the draw stream absorbs
};

// Gaussian-cluster multinomial logistic regression with a small ridge term.
// label_skew in [0,1] mixes a uniform class distribution (0) with a
// one-class-per-device-group partition (1): device groups of size M/classes
// each own one class, so skew 1 with 40 devices and 10 classes gives 4
// devices per class. Accuracy is measured on one held-out set shared by all
// devices.
class ClassificationTask;
std::shared_ptr<ClassificationTask> make_classification_task(
    std::size_t m, std::size_t classes, std::size_t features,
    std::size_t samples_per_device, double label_skew, std::uint64_t seed);

class ClassificationTask : public TrainTask {
public:
    std::size_t devices() const override { return m_; }
    std::size_t dimension() const override { return dim_; } // classes * (features + 1)
    double local_loss(std::size_t i, const Vec& x) const override;
    Vec stochastic_gradient(std::size_t i, const Vec& x, std::uint64_t seed,
                            std::uint64_t t) const override;
    Vec full_local_gradient(std::size_t i, const Vec& x) const override;
    EvalMetrics evaluate(const Vec& x) const override;
    double accuracy(const Vec& x) const override;
    bool has_accuracy() const override { return true; }

    std::size_t classes() const { return classes_; }
    // Loss of one stochastic draw (the sample stochastic_gradient(seed, t)
    // differentiates), for finite-difference checks.
    double draw_loss(std::size_t i, const Vec& x, std::uint64_t seed, std::uint64_t t) const;
    // Class label histogram of a device's local data.
    std::vector<std::size_t> label_histogram(std::size_t i) const;

private:
    friend std::shared_ptr<ClassificationTask> make_classification_task(
        std::size_t, std::size_t, std::size_t, std::size_t, double, std::uint64_t);
    ClassificationTask() = default;

    double sample_loss(std::size_t i, std::size_t idx, const Vec& x) const;
    void sample_grad_accum(std::size_t i, std::size_t idx, const Vec& x, Vec& g) const;
    std::size_t predict(const double* feat, const Vec& x) const;

    std::size_t m_ = 0, classes_ = 0, features_ = 0, per_device_ = 0, dim_ = 0;
    double ridge_ = 1e-3;
    Matrix centers_;                       // classes x features
    std::vector<Matrix> data_;             // per device: samples x (features+1), bias folded
    std::vector<std::vector<std::size_t>> labels_;
    Matrix holdout_;                       // rows: held-out samples (features+1)
    std::vector<std::size_t> holdout_labels_;
};

} // namespace dflopt
