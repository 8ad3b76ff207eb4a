#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dflopt/config.hpp"
#include "dflopt/dflsim.hpp"
#include "dflopt/matrix.hpp"
#include "dflopt/netgraph.hpp"
#include "dflopt/weightopt.hpp"

// Experiment pipeline shared by the CLI subcommands and the acceptance
// suite: parse a flat key=value config into a validated plan, execute
// network generation -> weight design -> training trials -> bound report,
// and persist each stage as CSV/JSON artifacts. Everything is a pure
// function of the config (one seed knob), so re-running a config
// reproduces every output byte for byte.

namespace dflopt {

inline constexpr const char* kToolName = "dflopt";
inline constexpr const char* kToolVersion = "0.1.0";

// Validated view over a Config. Unknown keys are rejected so typos fail
// loudly instead of silently running defaults.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "run-out";
    std::size_t trials = 1;

    // Network: geometric placements by default; a uniform link reliability
    // or an explicit CSV overrides the geometric model.
    NetworkSpec network;
    double uniform_reliability = -1.0; // < 0: unset
    std::string reliability_file;      // empty: unset

    enum class Design {
        OptimizedDistributed,
        OptimizedCentralized,
        Equal,
        MetropolisHastings,
        FromFile,
    };
    Design design = Design::OptimizedDistributed;
    std::string weights_file; // Design::FromFile

    OptimizerConfig optimizer; // seed is derived from `seed` at run time

    double learning_rate = 0.01;
    std::size_t rounds = 100;
    std::size_t batch = 1;
    TrainConfig::Scenario scenario = TrainConfig::Scenario::Static;
    bool post_mixing_gradient = false;
    std::size_t reopt_interval = 1;

    enum class Task { Quadratic, Classification };
    Task task = Task::Quadratic;
    std::size_t task_dimension = 10;
    double task_heterogeneity = 1.0; // beta target
    double task_noise = 0.5;         // alpha target
    bool task_shared_noise = false;
    std::size_t task_classes = 10;
    std::size_t task_features = 10;
    std::size_t task_samples = 60;
    double task_label_skew = 1.0;

    std::size_t moment_samples = 10000;

    // Throws a config error on unknown keys, invalid selector values,
    // violated invariants, or referenced files that do not exist.
    static ExperimentConfig from_config(const Config& c);
};

// Stage outputs kept in memory for callers (tests, acceptance runs).
struct ExperimentResult {
    std::string dir;
    Matrix reliability;
    Matrix weights;
    double design_rho = 0.0; // dense rho of the expected mixing matrix
    std::optional<OptimizeResult> trace; // optimized designs only
    std::vector<TrainResult> trials;
    std::string bound_report; // JSON text
};

// Stage helpers (each deterministic in the config).
Matrix build_reliability(const ExperimentConfig& cfg);
Matrix build_design(const ExperimentConfig& cfg, const Matrix& p,
                    std::optional<OptimizeResult>* trace);
std::shared_ptr<TrainTask> build_task(const ExperimentConfig& cfg);
TrainResult run_trial(const ExperimentConfig& cfg, const Matrix& w, const Matrix& p,
                      const TrainTask& task, std::size_t trial);
std::string bound_report_json(const ExperimentConfig& cfg, const TrainTask& task,
                              double rho_expected, double rho_second);

// Subcommand entry points. Each parses + validates `raw`, writes its
// artifacts under output_dir, and returns what it computed.
Matrix run_gen_network(const Config& raw);
Matrix run_optimize_weights(const Config& raw);
std::vector<TrainResult> run_simulate_training(const Config& raw);
std::string run_eval_bound(const Config& raw);

struct MomentVerification {
    std::size_t samples = 0;
    double first_max_deviation = 0.0;
    double first_max_se_multiple = 0.0;
    double second_max_deviation = 0.0;
    double second_max_se_multiple = 0.0;
    double se_threshold = 6.0;
    bool pass = true;
};

// Monte Carlo moment estimation for the configured (W, P); with `verify`
// the estimates are checked against the closed forms and a JSON report is
// written. Throws a verification error when an entry deviates by more than
// se_threshold standard errors (after writing the report).
MomentVerification run_estimate_moments(const Config& raw, bool verify);

// Full pipeline; writes the seven artifacts plus manifest.json.
ExperimentResult run_experiment(const Config& raw);

// Artifact file names under output_dir.
inline constexpr const char* kConfigEcho = "config.txt";
inline constexpr const char* kNetworkCsv = "network.csv";
inline constexpr const char* kWeightsCsv = "weights.csv";
inline constexpr const char* kTraceCsv = "optimizer_trace.csv";
inline constexpr const char* kMetricsCsv = "metrics.csv";
inline constexpr const char* kAggregateCsv = "aggregate.csv";
inline constexpr const char* kBoundReport = "bound_report.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kMomentsFirstCsv = "moments_first.csv";
inline constexpr const char* kMomentsSecondCsv = "moments_second.csv";
inline constexpr const char* kMomentsReport = "moments_report.json";

} // namespace dflopt
