#include "dflopt/experiment.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <set>
#include <string>

#include "json.hpp"

#include "dflopt/bound.hpp"
#include "dflopt/csvio.hpp"
#include "dflopt/errors.hpp"
#include "dflopt/mixing.hpp"
#include "dflopt/oracles.hpp"
#include "dflopt/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dflopt {

namespace {

// ---------------------------------------------------------------- parsing

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "seed",
        "output_dir",
        "trials",
        "network.devices",
        "network.decay_scale",
        "network.decay_exponent",
        "network.reliability",
        "network.reliability_file",
        "weights.design",
        "weights.file",
        "optimizer.schedule",
        "optimizer.step_size",
        "optimizer.iterations",
        "optimizer.diagnostics",
        "optimizer.inner.iterations",
        "optimizer.inner.tolerance",
        "optimizer.inner.normalization",
        "optimizer.inner.gossip_rounds",
        "train.learning_rate",
        "train.rounds",
        "train.batch",
        "train.scenario",
        "train.post_mixing_gradient",
        "train.reopt_interval",
        "task.kind",
        "task.dimension",
        "task.heterogeneity",
        "task.noise",
        "task.shared_noise",
        "task.classes",
        "task.features",
        "task.samples_per_device",
        "task.label_skew",
        "moments.samples",
    };
    return keys;
}

[[noreturn]] void bad_choice(const std::string& key, const std::string& got,
                             const std::string& valid) {
    throw config_error(key + ": unknown value '" + got + "' (valid: " + valid + ")");
}

std::size_t positive_size(const Config& c, const std::string& key, long long fallback) {
    long long v = c.get_int(key, fallback);
    if (v < 1) throw config_error(key + " must be >= 1");
    return static_cast<std::size_t>(v);
}

} // namespace

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
    for (const auto& [key, value] : c.entries()) {
        (void)value;
        if (!known_keys().count(key)) throw config_error("unknown config key: " + key);
    }

    ExperimentConfig e;
    e.seed = c.get_u64("seed", 0);
    e.output_dir = c.get_string("output_dir", "run-out");
    e.trials = positive_size(c, "trials", 1);

    e.network.devices = static_cast<std::size_t>(c.get_int("network.devices", 0));
    e.network.decay_scale = c.get_double("network.decay_scale", 2.0);
    e.network.decay_exponent = c.get_double("network.decay_exponent", 2.0);
    e.network.seed = e.seed;
    e.uniform_reliability = c.get_double("network.reliability", -1.0);
    e.reliability_file = c.get_string("network.reliability_file", "");
    if (e.uniform_reliability >= 0.0 && e.uniform_reliability > 1.0)
        throw config_error("network.reliability must lie in [0, 1]");
    if (!e.reliability_file.empty() && e.uniform_reliability >= 0.0)
        throw config_error("network.reliability and network.reliability_file are exclusive");
    if (!e.reliability_file.empty() && !fs::exists(e.reliability_file))
        throw config_error("network.reliability_file does not exist: " + e.reliability_file);
    if (e.reliability_file.empty() && e.network.devices < 2)
        throw config_error("network.devices must be >= 2");

    std::string design = c.get_string("weights.design", "optimized-distributed");
    if (design == "optimized-distributed") e.design = Design::OptimizedDistributed;
    else if (design == "optimized-centralized") e.design = Design::OptimizedCentralized;
    else if (design == "equal") e.design = Design::Equal;
    else if (design == "metropolis-hastings") e.design = Design::MetropolisHastings;
    else if (design == "from-file") e.design = Design::FromFile;
    else
        bad_choice("weights.design", design,
                   "optimized-distributed, optimized-centralized, equal, "
                   "metropolis-hastings, from-file");
    e.weights_file = c.get_string("weights.file", "");
    if (e.design == Design::FromFile) {
        if (e.weights_file.empty())
            throw config_error("weights.design = from-file requires weights.file");
        if (!fs::exists(e.weights_file))
            throw config_error("weights.file does not exist: " + e.weights_file);
    }

    std::string schedule = c.get_string("optimizer.schedule", "constant");
    if (schedule == "constant")
        e.optimizer.schedule = OptimizerConfig::StepSchedule::Constant;
    else if (schedule == "harmonic")
        e.optimizer.schedule = OptimizerConfig::StepSchedule::Harmonic;
    else
        bad_choice("optimizer.schedule", schedule, "constant, harmonic");
    e.optimizer.step_size = c.get_double("optimizer.step_size", 0.01);
    if (e.optimizer.step_size <= 0.0) throw config_error("optimizer.step_size must be > 0");
    e.optimizer.outer_iterations = positive_size(c, "optimizer.iterations", 10000);
    e.optimizer.collect_diagnostics = c.get_bool("optimizer.diagnostics", false);
    e.optimizer.inner.max_iterations = positive_size(c, "optimizer.inner.iterations", 10000);
    e.optimizer.inner.residual_tolerance = c.get_double("optimizer.inner.tolerance", 0.0);
    if (e.optimizer.inner.residual_tolerance < 0.0)
        throw config_error("optimizer.inner.tolerance must be >= 0");
    std::string norm = c.get_string("optimizer.inner.normalization", "exact-reduce");
    if (norm == "exact-reduce")
        e.optimizer.inner.normalization = IterationConfig::Normalization::ExactReduce;
    else if (norm == "gossip")
        e.optimizer.inner.normalization = IterationConfig::Normalization::Gossip;
    else
        bad_choice("optimizer.inner.normalization", norm, "exact-reduce, gossip");
    e.optimizer.inner.gossip_rounds = positive_size(c, "optimizer.inner.gossip_rounds", 50);

    e.learning_rate = c.get_double("train.learning_rate", 0.01);
    if (e.learning_rate <= 0.0) throw config_error("train.learning_rate must be > 0");
    long long rounds = c.get_int("train.rounds", 100);
    if (rounds < 0) throw config_error("train.rounds must be >= 0");
    e.rounds = static_cast<std::size_t>(rounds);
    e.batch = positive_size(c, "train.batch", 1);
    std::string scenario = c.get_string("train.scenario", "static");
    if (scenario == "static") e.scenario = TrainConfig::Scenario::Static;
    else if (scenario == "dynamic") e.scenario = TrainConfig::Scenario::Dynamic;
    else bad_choice("train.scenario", scenario, "static, dynamic");
    e.post_mixing_gradient = c.get_bool("train.post_mixing_gradient", false);
    e.reopt_interval = positive_size(c, "train.reopt_interval", 1);
    if (e.scenario == TrainConfig::Scenario::Dynamic) {
        if (!e.reliability_file.empty() || e.uniform_reliability >= 0.0)
            throw config_error("train.scenario = dynamic requires a geometric network");
        if (e.design != Design::OptimizedDistributed && e.design != Design::OptimizedCentralized)
            throw config_error("train.scenario = dynamic requires an optimized weight design");
    }

    std::string task = c.get_string("task.kind", "quadratic");
    if (task == "quadratic") e.task = Task::Quadratic;
    else if (task == "classification") e.task = Task::Classification;
    else bad_choice("task.kind", task, "quadratic, classification");
    e.task_dimension = positive_size(c, "task.dimension", 10);
    e.task_heterogeneity = c.get_double("task.heterogeneity", 1.0);
    e.task_noise = c.get_double("task.noise", 0.5);
    if (e.task_heterogeneity < 0.0) throw config_error("task.heterogeneity must be >= 0");
    if (e.task_noise < 0.0) throw config_error("task.noise must be >= 0");
    e.task_shared_noise = c.get_bool("task.shared_noise", false);
    e.task_classes = positive_size(c, "task.classes", 10);
    e.task_features = positive_size(c, "task.features", 10);
    e.task_samples = positive_size(c, "task.samples_per_device", 60);
    e.task_label_skew = c.get_double("task.label_skew", 1.0);
    if (e.task_label_skew < 0.0 || e.task_label_skew > 1.0)
        throw config_error("task.label_skew must lie in [0, 1]");

    e.moment_samples = positive_size(c, "moments.samples", 10000);
    return e;
}

// ---------------------------------------------------------------- stages

Matrix build_reliability(const ExperimentConfig& cfg) {
    if (!cfg.reliability_file.empty()) {
        Matrix p = csvio::read_matrix(cfg.reliability_file);
        if (p.rows() < 2)
            throw config_error("network.reliability_file: need at least 2 devices");
        if (cfg.network.devices != 0 && cfg.network.devices != p.rows())
            throw config_error("network.devices disagrees with network.reliability_file");
        validate_reliability(p);
        return p;
    }
    if (cfg.uniform_reliability >= 0.0) {
        Matrix p(cfg.network.devices, cfg.network.devices, cfg.uniform_reliability);
        for (std::size_t i = 0; i < p.rows(); ++i) p(i, i) = 0.0;
        return p;
    }
    NetworkSpec spec = make_random_spec(cfg.network.devices, cfg.network.decay_scale,
                                        cfg.network.decay_exponent, cfg.network.seed);
    return generate_geometric(spec);
}

Matrix build_design(const ExperimentConfig& cfg, const Matrix& p,
                    std::optional<OptimizeResult>* trace) {
    if (trace) trace->reset();
    switch (cfg.design) {
    case ExperimentConfig::Design::Equal:
        return design_equal(p.rows());
    case ExperimentConfig::Design::MetropolisHastings:
        return design_metropolis_hastings(p);
    case ExperimentConfig::Design::FromFile: {
        Matrix w = csvio::read_matrix(cfg.weights_file);
        if (w.rows() != p.rows())
            throw config_error("weights.file dimension disagrees with the network");
        validate_weight_matrix(w, 1e-9);
        return w;
    }
    case ExperimentConfig::Design::OptimizedDistributed:
    case ExperimentConfig::Design::OptimizedCentralized: {
        OptimizerConfig oc = cfg.optimizer;
        oc.seed = rng::stream_key(cfg.seed, rng::Tag::EigenInit, 0);
        OptimizeMode mode = cfg.design == ExperimentConfig::Design::OptimizedDistributed
                                ? OptimizeMode::Distributed
                                : OptimizeMode::Centralized;
        OptimizeResult r = optimize_weights(p, oc, mode);
        Matrix w = r.weights;
        if (trace) *trace = std::move(r);
        return w;
    }
    }
    throw runtime_error("build_design: unreachable");
}

std::shared_ptr<TrainTask> build_task(const ExperimentConfig& cfg) {
    std::size_t m = cfg.network.devices;
    std::uint64_t task_seed = rng::stream_key(cfg.seed, rng::Tag::TaskData, 0);
    if (cfg.task == ExperimentConfig::Task::Quadratic)
        return make_quadratic_task(m, cfg.task_dimension, cfg.task_heterogeneity,
                                   cfg.task_noise, task_seed, cfg.task_shared_noise);
    return make_classification_task(m, cfg.task_classes, cfg.task_features,
                                    cfg.task_samples, cfg.task_label_skew, task_seed);
}

TrainResult run_trial(const ExperimentConfig& cfg, const Matrix& w, const Matrix& p,
                      const TrainTask& task, std::size_t trial) {
    TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.rounds = cfg.rounds;
    tc.batch = cfg.batch;
    tc.scenario = cfg.scenario;
    tc.seed = rng::stream_key(cfg.seed, rng::Tag::Trial, trial);
    tc.post_mixing_gradient = cfg.post_mixing_gradient;
    if (cfg.scenario == TrainConfig::Scenario::Dynamic) {
        tc.network = make_random_spec(cfg.network.devices, cfg.network.decay_scale,
                                      cfg.network.decay_exponent, cfg.network.seed);
        tc.reopt_interval = cfg.reopt_interval;
        tc.reopt = cfg.optimizer;
        tc.reopt_mode = cfg.design == ExperimentConfig::Design::OptimizedDistributed
                            ? OptimizeMode::Distributed
                            : OptimizeMode::Centralized;
    }
    return run_training(w, p, task, tc);
}

// ---------------------------------------------------------------- bound

namespace {

struct BoundConstants {
    double smoothness = 0.0;
    double noise_var = 0.0;
    double heterogeneity = 0.0;
    double initial_loss = 0.0;
    double optimal_loss = 0.0;
    const char* source = "closed-form";
};

// Quadratic tasks carry their constants exactly; other tasks are probed at
// the zero model (finite-difference curvature, draw variance, gradient
// divergence) and the optimal loss is replaced by the trivial lower bound 0.
BoundConstants gather_constants(const ExperimentConfig& cfg, const TrainTask& task) {
    BoundConstants k;
    const std::size_t m = task.devices();
    const std::size_t d = task.dimension();
    Vec zero(d, 0.0);
    k.initial_loss = task.evaluate(zero).loss;

    if (const auto* q = dynamic_cast<const QuadraticTask*>(&task)) {
        k.smoothness = q->smoothness();
        k.noise_var = q->noise_var();
        k.heterogeneity = q->heterogeneity();
        k.optimal_loss = q->optimal_loss();
        k.source = "closed-form";
        return k;
    }

    k.source = "probe-estimate";
    k.optimal_loss = 0.0;

    Vec gbar(d, 0.0);
    std::vector<Vec> grads(m);
    for (std::size_t i = 0; i < m; ++i) {
        grads[i] = task.full_local_gradient(i, zero);
        axpy(1.0, grads[i], gbar);
    }
    scale(1.0 / static_cast<double>(m), gbar);
    for (std::size_t i = 0; i < m; ++i) {
        Vec diff = grads[i];
        axpy(-1.0, gbar, diff);
        k.heterogeneity += dot(diff, diff) / static_cast<double>(m);
    }

    const std::size_t draws = 64;
    std::uint64_t noise_seed = rng::stream_key(cfg.seed, rng::Tag::Perturb, 1);
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t t = 0; t < draws; ++t) {
            Vec g = task.stochastic_gradient(i, zero, noise_seed, t);
            axpy(-1.0, grads[i], g);
            acc += dot(g, g);
        }
        k.noise_var = std::max(k.noise_var, acc / static_cast<double>(draws));
    }

    const double h = 1e-3;
    for (std::size_t probe = 0; probe < 32; ++probe) {
        rng::Stream s(rng::stream_key(cfg.seed, rng::Tag::Perturb, 2, probe));
        Vec x(d);
        for (std::size_t j = 0; j < d; ++j) x[j] = s.next_normal();
        scale(h / norm2(x), x);
        Vec g(d, 0.0);
        for (std::size_t i = 0; i < m; ++i) axpy(1.0, task.full_local_gradient(i, x), g);
        scale(1.0 / static_cast<double>(m), g);
        axpy(-1.0, gbar, g);
        k.smoothness = std::max(k.smoothness, norm2(g) / h);
    }
    return k;
}

json finite_or_null(double v) {
    if (std::isfinite(v)) return json(v);
    return json(nullptr);
}

} // namespace

std::string bound_report_json(const ExperimentConfig& cfg, const TrainTask& task,
                              double rho_expected, double rho_second) {
    BoundConstants k = gather_constants(cfg, task);

    BoundParams bp;
    bp.smoothness = k.smoothness;
    bp.noise_var = k.noise_var;
    bp.heterogeneity = k.heterogeneity;
    bp.learning_rate = cfg.learning_rate;
    bp.devices = task.devices();
    bp.horizon = cfg.rounds > 0 ? cfg.rounds : 1;
    bp.initial_loss = k.initial_loss;
    bp.optimal_loss = k.optimal_loss;
    bp.rho = rho_second;

    PreconditionCheck pre = check_precondition(bp);

    json j;
    j["devices"] = bp.devices;
    j["horizon"] = bp.horizon;
    j["learning_rate"] = bp.learning_rate;
    j["rho_expected_mixing"] = rho_expected;
    j["rho_second_moment"] = rho_second;
    j["constants"] = {
        {"smoothness", k.smoothness},
        {"noise_var", k.noise_var},
        {"heterogeneity", k.heterogeneity},
        {"initial_loss", k.initial_loss},
        {"optimal_loss", k.optimal_loss},
    };
    j["constants_source"] = k.source;
    j["precondition"] = {
        {"holds", pre.holds},
        {"margin", finite_or_null(pre.margin)},
        {"max_learning_rate", finite_or_null(pre.margin + bp.learning_rate)},
    };
    if (pre.holds) {
        j["penalty_G"] = eval_G(bp);
        j["bound"] = eval_bound(bp);
    } else {
        j["penalty_G"] = nullptr;
        j["bound"] = nullptr;
    }
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- writers

namespace {

std::string join(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw runtime_error("cannot create output directory " + dir + ": " + ec.message());
}

// Trace rows: row 0 is the starting design; row n >= 1 the state after
// iteration n. The inexactness columns hold nan unless the optimizer ran
// with per-iteration diagnostics enabled.
void write_trace_csv(const std::string& path, double design_rho,
                     const OptimizeResult* r) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    csvio::Table t({"iteration", "rho", "step_size", "epsilon_n",
                    "deviation_bound_ratio", "repair_count"});
    if (!r) {
        t.add_row({csvio::fmt_int(0), csvio::fmt_double(design_rho), csvio::fmt_double(0.0),
                   csvio::fmt_double(nan), csvio::fmt_double(nan), csvio::fmt_int(0)});
        t.write(path);
        return;
    }
    const bool diag = !r->diagnostics.empty();
    t.add_row({csvio::fmt_int(0), csvio::fmt_double(r->rho_trace[0]), csvio::fmt_double(0.0),
               csvio::fmt_double(nan), csvio::fmt_double(nan), csvio::fmt_int(0)});
    for (std::size_t n = 1; n < r->rho_trace.size(); ++n) {
        double eps = nan, ratio = nan;
        if (diag && n - 1 < r->diagnostics.size()) {
            eps = r->diagnostics[n - 1].epsilon;
            ratio = r->diagnostics[n - 1].ratio;
        }
        long long repairs = n - 1 < r->repair_trace.size()
                                ? static_cast<long long>(r->repair_trace[n - 1])
                                : 0;
        t.add_row({csvio::fmt_int(static_cast<long long>(n)),
                   csvio::fmt_double(r->rho_trace[n]),
                   csvio::fmt_double(r->step_sizes[n - 1]), csvio::fmt_double(eps),
                   csvio::fmt_double(ratio), csvio::fmt_int(repairs)});
    }
    t.write(path);
}

void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& rows) {
    csvio::Table t({"round", "global_loss", "consensus_error", "grad_norm_sq",
                    "avg_accuracy", "min_accuracy"});
    for (const RoundMetrics& r : rows)
        t.add_row({csvio::fmt_int(static_cast<long long>(r.round)),
                   csvio::fmt_double(r.global_loss), csvio::fmt_double(r.consensus_error),
                   csvio::fmt_double(r.grad_norm_sq), csvio::fmt_double(r.avg_accuracy),
                   csvio::fmt_double(r.min_accuracy)});
    t.write(path);
}

void write_aggregate_csv(const std::string& path, const std::vector<TrainResult>& trials) {
    static constexpr const char* kMetricNames[] = {
        "global_loss", "consensus_error", "grad_norm_sq", "avg_accuracy", "min_accuracy"};
    auto metric_value = [](const RoundMetrics& r, std::size_t which) {
        switch (which) {
        case 0: return r.global_loss;
        case 1: return r.consensus_error;
        case 2: return r.grad_norm_sq;
        case 3: return r.avg_accuracy;
        default: return r.min_accuracy;
        }
    };

    csvio::Table t({"round", "metric", "mean", "std", "trials"});
    const std::size_t n = trials.size();
    const std::size_t rounds = n ? trials[0].metrics.size() : 0;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t round = 0; round < rounds; ++round) {
        for (std::size_t which = 0; which < 5; ++which) {
            double mean = 0.0;
            bool defined = true;
            for (const TrainResult& tr : trials) {
                double v = metric_value(tr.metrics[round], which);
                if (!std::isfinite(v)) defined = false;
                mean += v;
            }
            mean /= static_cast<double>(n);
            double sd = 0.0;
            if (n > 1) {
                for (const TrainResult& tr : trials) {
                    double d = metric_value(tr.metrics[round], which) - mean;
                    sd += d * d;
                }
                sd = std::sqrt(sd / static_cast<double>(n - 1));
            }
            t.add_row({csvio::fmt_int(static_cast<long long>(round)), kMetricNames[which],
                       csvio::fmt_double(defined ? mean : nan),
                       csvio::fmt_double(defined ? sd : nan),
                       csvio::fmt_int(static_cast<long long>(n))});
        }
    }
    t.write(path);
}

} // namespace

// ------------------------------------------------------------ subcommands

Matrix run_gen_network(const Config& raw) {
    ExperimentConfig cfg = ExperimentConfig::from_config(raw);
    Matrix p = build_reliability(cfg);
    ensure_dir(cfg.output_dir);
    csvio::write_matrix(join(cfg.output_dir, kNetworkCsv), p);
    return p;
}

Matrix run_optimize_weights(const Config& raw) {
    ExperimentConfig cfg = ExperimentConfig::from_config(raw);
    Matrix p = build_reliability(cfg);
    std::optional<OptimizeResult> trace;
    Matrix w = build_design(cfg, p, &trace);
    ensure_dir(cfg.output_dir);
    csvio::write_matrix(join(cfg.output_dir, kWeightsCsv), w);
    write_trace_csv(join(cfg.output_dir, kTraceCsv), dense_rho(expected_mixing(w, p)),
                    trace ? &*trace : nullptr);
    return w;
}

std::vector<TrainResult> run_simulate_training(const Config& raw) {
    ExperimentConfig cfg = ExperimentConfig::from_config(raw);
    Matrix p = build_reliability(cfg);
    std::optional<OptimizeResult> trace;
    Matrix w = build_design(cfg, p, &trace);
    std::shared_ptr<TrainTask> task = build_task(cfg);
    std::vector<TrainResult> trials;
    trials.reserve(cfg.trials);
    for (std::size_t k = 0; k < cfg.trials; ++k)
        trials.push_back(run_trial(cfg, w, p, *task, k));
    ensure_dir(cfg.output_dir);
    write_metrics_csv(join(cfg.output_dir, kMetricsCsv), trials[0].metrics);
    write_aggregate_csv(join(cfg.output_dir, kAggregateCsv), trials);
    return trials;
}

std::string run_eval_bound(const Config& raw) {
    ExperimentConfig cfg = ExperimentConfig::from_config(raw);
    Matrix p = build_reliability(cfg);
    std::optional<OptimizeResult> trace;
    Matrix w = build_design(cfg, p, &trace);
    std::shared_ptr<TrainTask> task = build_task(cfg);
    Matrix wbar = expected_mixing(w, p);
    double rho_second = spectral_summary(second_moment(w, p).second_moment).rho;
    std::string report = bound_report_json(cfg, *task, dense_rho(wbar), rho_second);
    ensure_dir(cfg.output_dir);
    csvio::write_file(join(cfg.output_dir, kBoundReport), report);
    return report;
}

MomentVerification run_estimate_moments(const Config& raw, bool verify) {
    ExperimentConfig cfg = ExperimentConfig::from_config(raw);
    Matrix p = build_reliability(cfg);
    std::optional<OptimizeResult> trace;
    Matrix w = build_design(cfg, p, &trace);

    oracles::MomentEstimate est = oracles::mc_moments(
        w, p, cfg.moment_samples, rng::stream_key(cfg.seed, rng::Tag::Generic, 0));
    ensure_dir(cfg.output_dir);
    csvio::write_matrix(join(cfg.output_dir, kMomentsFirstCsv), est.first_moment);
    csvio::write_matrix(join(cfg.output_dir, kMomentsSecondCsv), est.second_moment);

    MomentVerification v;
    v.samples = est.samples;
    if (!verify) return v;

    MixingMoments closed = second_moment(w, p);
    // An entry passes when it deviates from the closed form by at most
    // se_threshold standard errors (absolute floor 1e-12 for entries whose
    // sampled value is deterministic, where the standard error is zero).
    auto compare = [&](const Matrix& mc, const Matrix& exact, const Matrix& se,
                       double& max_dev, double& max_mult) {
        for (std::size_t i = 0; i < mc.rows(); ++i)
            for (std::size_t j = 0; j < mc.cols(); ++j) {
                double dev = std::abs(mc(i, j) - exact(i, j));
                max_dev = std::max(max_dev, dev);
                if (se(i, j) > 0.0) max_mult = std::max(max_mult, dev / se(i, j));
                if (dev > std::max(v.se_threshold * se(i, j), 1e-12)) v.pass = false;
            }
    };
    compare(est.first_moment, closed.first_moment, est.first_se, v.first_max_deviation,
            v.first_max_se_multiple);
    compare(est.second_moment, closed.second_moment, est.second_se, v.second_max_deviation,
            v.second_max_se_multiple);

    json j;
    j["samples"] = v.samples;
    j["se_threshold"] = v.se_threshold;
    j["first_moment"] = {
        {"max_abs_deviation", v.first_max_deviation},
        {"max_se_multiple", v.first_max_se_multiple},
    };
    j["second_moment"] = {
        {"max_abs_deviation", v.second_max_deviation},
        {"max_se_multiple", v.second_max_se_multiple},
    };
    j["pass"] = v.pass;
    csvio::write_file(join(cfg.output_dir, kMomentsReport), j.dump(2) + "\n");

    if (!v.pass)
        throw verification_error(
            "estimate-moments: Monte Carlo estimate deviates from the closed form "
            "by more than " + csvio::fmt_double(v.se_threshold) + " standard errors");
    return v;
}

ExperimentResult run_experiment(const Config& raw) {
    ExperimentConfig cfg = ExperimentConfig::from_config(raw);

    ExperimentResult out;
    out.dir = cfg.output_dir;
    out.reliability = build_reliability(cfg);
    out.weights = build_design(cfg, out.reliability, &out.trace);
    Matrix wbar = expected_mixing(out.weights, out.reliability);
    out.design_rho = dense_rho(wbar);
    double rho_second =
        spectral_summary(second_moment(out.weights, out.reliability).second_moment).rho;

    std::shared_ptr<TrainTask> task = build_task(cfg);
    out.trials.reserve(cfg.trials);
    for (std::size_t k = 0; k < cfg.trials; ++k)
        out.trials.push_back(run_trial(cfg, out.weights, out.reliability, *task, k));

    out.bound_report = bound_report_json(cfg, *task, out.design_rho, rho_second);

    ensure_dir(cfg.output_dir);
    csvio::write_file(join(cfg.output_dir, kConfigEcho), raw.canonical_text());
    csvio::write_matrix(join(cfg.output_dir, kNetworkCsv), out.reliability);
    csvio::write_matrix(join(cfg.output_dir, kWeightsCsv), out.weights);
    write_trace_csv(join(cfg.output_dir, kTraceCsv), out.design_rho,
                    out.trace ? &*out.trace : nullptr);
    write_metrics_csv(join(cfg.output_dir, kMetricsCsv), out.trials[0].metrics);
    write_aggregate_csv(join(cfg.output_dir, kAggregateCsv), out.trials);
    csvio::write_file(join(cfg.output_dir, kBoundReport), out.bound_report);

    json manifest;
    manifest["tool"] = kToolName;
    manifest["version"] = kToolVersion;
    manifest["seed"] = cfg.seed;
    json trial_seeds = json::array();
    for (std::size_t k = 0; k < cfg.trials; ++k)
        trial_seeds.push_back(rng::stream_key(cfg.seed, rng::Tag::Trial, k));
    manifest["derived_seeds"] = {
        {"optimizer", rng::stream_key(cfg.seed, rng::Tag::EigenInit, 0)},
        {"task", rng::stream_key(cfg.seed, rng::Tag::TaskData, 0)},
        {"trials", trial_seeds},
    };
    manifest["trials"] = cfg.trials;
    manifest["artifacts"] = {kConfigEcho, kNetworkCsv,   kWeightsCsv, kTraceCsv,
                             kMetricsCsv, kAggregateCsv, kBoundReport};
    csvio::write_file(join(cfg.output_dir, kManifest), manifest.dump(2) + "\n");
    return out;
}

} // namespace dflopt
