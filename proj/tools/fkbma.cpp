#include <chrono>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fkbma/harness.hpp"

namespace {

void print_summary(const fkbma::StudyResult& result) {
    const auto& oc = result.inclusive;
    auto line = [](const char* name, const fkbma::Estimate& e) {
        std::cout << "  " << name << ": " << e.value << " (se " << e.se << ")\n";
    };
    std::cout << "replications analysed: " << oc.replications << ", failed: " << result.failed << '\n';
    line("power", oc.power);
    line("generalized_power", oc.generalized_power);
    line("correct_marker_rate", oc.correct_marker_rate);
    line("accuracy", oc.accuracy);
    line("mean_sample_size", oc.mean_sample_size);
    line("nonconvergence_rate", oc.nonconvergence_rate);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian adaptive-enrichment trial simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<int> reps;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "results";
    std::string profile;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "simulate replications of a trial design");
    run->add_option("--config", config_path, "JSON design configuration")->required()->check(CLI::ExistingFile);
    run->add_option("--reps", reps, "number of replications");
    run->add_option("--seed", seed, "base random seed");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--profile", profile, "MCMC settings profile")->check(CLI::IsMember({"fast", "full"}));
    run->add_flag("--quiet", quiet, "suppress per-replication progress");

    app.add_subcommand("scenarios", "list scenario ids");

    auto* validate = app.add_subcommand("validate", "check a configuration and print its effective form");
    validate->add_option("--config", config_path, "JSON design configuration")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("scenarios")) {
            for (const auto& id : fkbma::scenario_ids()) {
                const auto s = fkbma::find_scenario(id);
                std::cout << id << "  prevalence " << s.reference_prevalence << "  delta " << s.reference_delta
                          << '\n';
            }
            return 0;
        }
        fkbma::DesignConfig config = fkbma::load_config(config_path);
        if (app.got_subcommand("validate")) {
            std::cout << fkbma::config_to_json(config);
            return 0;
        }
        if (profile == "fast") fkbma::apply_profile(config, fkbma::McmcProfile::Fast);
        if (profile == "full") fkbma::apply_profile(config, fkbma::McmcProfile::Full);
        if (reps) config.replications = *reps;
        if (seed) config.seed = *seed;
        config.validate();

        const auto start = std::chrono::steady_clock::now();
        int done = 0;
        const auto result = fkbma::run_study(config, [&](const fkbma::TrialRecord& r) {
            ++done;
            if (quiet) return;
            std::cerr << "[" << done << "/" << config.replications << "] replication " << r.replication << ": "
                      << (r.valid ? std::string(fkbma::verdict_name(r.verdict)) : "failed: " + r.error)
                      << " n=" << r.enrolled_n << '\n';
        });
        fkbma::emit_results(result, config, out_dir);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        print_summary(result);
        std::cout << "wrote " << out_dir << "/{trials.csv,summary.csv,config.json} in " << secs << " s\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
