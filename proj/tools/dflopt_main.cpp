// Command-line front end: small subcommands over the experiment pipeline.
// Every subcommand reads the same flat key=value config (--config PATH) with
// targeted overrides (--set key=value), so a full run and its individual
// stages always agree on their inputs.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dflopt/config.hpp"
#include "dflopt/errors.hpp"
#include "dflopt/experiment.hpp"

namespace {

struct Invocation {
    std::string config_path;
    std::vector<std::string> sets;
};

void add_common_options(CLI::App* sub, Invocation& inv) {
    sub->add_option("--config", inv.config_path, "config file (key = value lines)")
        ->check(CLI::ExistingFile);
    sub->add_option("--set", inv.sets, "override a config key, e.g. --set seed=7")
        ->take_all();
}

dflopt::Config assemble_config(const Invocation& inv) {
    dflopt::Config cfg;
    if (!inv.config_path.empty()) cfg = dflopt::Config::load(inv.config_path);
    for (const std::string& s : inv.sets) cfg.set_from_assignment(s);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized SGD over unreliable device-to-device networks: "
                 "network synthesis, mixing-weight optimization, training simulation, "
                 "and convergence-bound evaluation."};
    app.require_subcommand(1);

    Invocation inv_gen, inv_opt, inv_sim, inv_bound, inv_mom, inv_run;
    bool verify_moments = false;

    CLI::App* gen = app.add_subcommand("gen-network", "Write the link reliability matrix");
    add_common_options(gen, inv_gen);
    CLI::App* opt = app.add_subcommand(
        "optimize-weights", "Design aggregation weights and write the optimizer trace");
    add_common_options(opt, inv_opt);
    CLI::App* sim = app.add_subcommand(
        "simulate-training", "Run decentralized SGD trials and write per-round metrics");
    add_common_options(sim, inv_sim);
    CLI::App* bnd = app.add_subcommand(
        "eval-bound", "Evaluate the convergence bound for the configured design");
    add_common_options(bnd, inv_bound);
    CLI::App* mom = app.add_subcommand(
        "estimate-moments", "Monte Carlo estimates of the mixing-matrix moments");
    add_common_options(mom, inv_mom);
    mom->add_flag("--verify", verify_moments,
                  "check the estimates against the closed forms (exit 3 on failure)");
    CLI::App* run = app.add_subcommand("run", "Full pipeline: network, weights, training, bound");
    add_common_options(run, inv_run);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1; // malformed invocation is a config error
    }

    try {
        if (gen->parsed()) {
            dflopt::Config cfg = assemble_config(inv_gen);
            dflopt::Matrix p = dflopt::run_gen_network(cfg);
            std::printf("wrote %s for %zu devices under %s\n", dflopt::kNetworkCsv, p.rows(),
                        cfg.get_string("output_dir", "run-out").c_str());
        } else if (opt->parsed()) {
            dflopt::Config cfg = assemble_config(inv_opt);
            dflopt::Matrix w = dflopt::run_optimize_weights(cfg);
            std::printf("wrote %s and %s for %zu devices under %s\n", dflopt::kWeightsCsv,
                        dflopt::kTraceCsv, w.rows(),
                        cfg.get_string("output_dir", "run-out").c_str());
        } else if (sim->parsed()) {
            dflopt::Config cfg = assemble_config(inv_sim);
            std::vector<dflopt::TrainResult> trials = dflopt::run_simulate_training(cfg);
            double final_loss = trials[0].metrics.empty()
                                    ? 0.0
                                    : trials[0].metrics.back().global_loss;
            std::printf("ran %zu trial(s); wrote %s and %s under %s "
                        "(trial 0 final loss %.6g)\n",
                        trials.size(), dflopt::kMetricsCsv, dflopt::kAggregateCsv,
                        cfg.get_string("output_dir", "run-out").c_str(), final_loss);
        } else if (bnd->parsed()) {
            dflopt::Config cfg = assemble_config(inv_bound);
            std::string report = dflopt::run_eval_bound(cfg);
            std::fputs(report.c_str(), stdout);
        } else if (mom->parsed()) {
            dflopt::Config cfg = assemble_config(inv_mom);
            dflopt::MomentVerification v = dflopt::run_estimate_moments(cfg, verify_moments);
            if (verify_moments)
                std::printf("verified %zu samples: max deviation %.3g (first), %.3g (second); "
                            "max SE multiple %.3g (first), %.3g (second)\n",
                            v.samples, v.first_max_deviation, v.second_max_deviation,
                            v.first_max_se_multiple, v.second_max_se_multiple);
            else
                std::printf("wrote %s and %s from %zu samples\n", dflopt::kMomentsFirstCsv,
                            dflopt::kMomentsSecondCsv, v.samples);
        } else if (run->parsed()) {
            dflopt::Config cfg = assemble_config(inv_run);
            dflopt::ExperimentResult r = dflopt::run_experiment(cfg);
            double final_loss =
                r.trials[0].metrics.empty() ? 0.0 : r.trials[0].metrics.back().global_loss;
            std::printf("run complete under %s: design rho %.6g, %zu trial(s), "
                        "trial 0 final loss %.6g\n",
                        r.dir.c_str(), r.design_rho, r.trials.size(), final_loss);
        }
    } catch (const dflopt::Error& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return err.exit_code();
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 2;
    }
    return 0;
}
