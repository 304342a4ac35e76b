#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fkbma/trial.hpp"

namespace fkbma {

enum class McmcProfile { Full, Fast };

struct DesignConfig {
    std::string scenario;
    int replications = 1000;
    std::uint64_t seed = 1;
    int external_test_size = 10000;
    int threads = 0;  // 0: hardware concurrency, overridden by FKBMA_THREADS
    TrialDesign design;

    void validate() const;
};

/// Applies the MCMC settings of a profile. The fast profile also caps
/// replications at 50.
void apply_profile(DesignConfig& config, McmcProfile profile);

/// Parses a JSON document. Missing keys take defaults (alpha and lambda1 from
/// the scenario), unknown keys and out-of-range values throw.
DesignConfig parse_config(const std::string& json_text);
DesignConfig load_config(const std::filesystem::path& path);

/// Effective configuration as JSON; parse_config(config_to_json(c)) == c.
std::string config_to_json(const DesignConfig& config);
bool operator==(const DesignConfig& a, const DesignConfig& b);

struct TrialRecord {
    int replication = 0;
    bool valid = true;
    std::string error;
    Verdict verdict = Verdict::NotSuperior;
    int stop_stage = 0;
    int enrolled_n = 0;
    std::vector<std::string> selected_variables;
    std::vector<double> stagewise_prevalence;
    bool correct_markers = false;
    double accuracy = 0.0;
    bool converged = true;
    double max_abs_geweke = 0.0;
};

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

struct OperatingCharacteristics {
    int replications = 0;  // records entering the aggregates
    Estimate power;
    Estimate generalized_power;
    Estimate correct_marker_rate;
    Estimate accuracy;
    Estimate mean_sample_size;
    Estimate nonconvergence_rate;
};

struct StudyResult {
    std::vector<TrialRecord> records;
    int failed = 0;
    OperatingCharacteristics inclusive;       // every valid replication
    OperatingCharacteristics converged_only;  // valid replications whose fits all converged
};

/// Rates are means of 0/1 outcomes with se sqrt(p(1-p)/R); accuracy and sample
/// size use the sample standard deviation over sqrt(R).
OperatingCharacteristics aggregate(const std::vector<TrialRecord>& records);

/// Runs one replication. Replication r always uses stream r of the seed.
TrialRecord run_replication(const Scenario& scenario, const DesignConfig& config, int replication,
                            const Eigen::MatrixXd& external_x, const Eigen::MatrixXd& external_z);

/// External test profiles, drawn from a stream reserved for them.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> external_test_set(const Scenario& scenario, const DesignConfig& config);

int resolve_threads(const DesignConfig& config);

StudyResult run_study(const DesignConfig& config,
                      const std::function<void(const TrialRecord&)>& on_record = {});

/// Writes trials.csv, summary.csv and config.json into `directory`.
void emit_results(const StudyResult& result, const DesignConfig& config, const std::filesystem::path& directory);

std::string trials_csv(const std::vector<TrialRecord>& records);
std::string summary_csv(const StudyResult& result);

}  // namespace fkbma
