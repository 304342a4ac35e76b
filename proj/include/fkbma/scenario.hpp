#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fkbma/rng.hpp"

namespace fkbma {

enum class Study { I, II };

/// Covariates of one patient: continuous markers x, binary markers z.
struct Profile {
    std::vector<double> x;
    std::vector<double> z;
};

/// A simulation scenario. Continuous markers are Uniform(0,1), binary markers
/// independent Bernoulli draws, noise standard normal.
struct Scenario {
    std::string id;
    Study study = Study::I;
    int number = 1;
    bool predictive_effects = true;
    std::vector<double> binary_prevalences;
    int continuous_count = 1;
    double noise_sd = 1.0;
    double reference_prevalence = 0.0;  // published prevalence of {gamma > 0}
    double reference_delta = 0.0;       // published mean of gamma over {gamma > 0}

    [[nodiscard]] double true_gamma(std::span<const double> x, std::span<const double> z) const;
    [[nodiscard]] double true_main(std::span<const double> x, std::span<const double> z) const;
    [[nodiscard]] double true_gamma(const Profile& p) const { return true_gamma(p.x, p.z); }
    [[nodiscard]] double true_main(const Profile& p) const { return true_main(p.x, p.z); }

    [[nodiscard]] Profile generate_patient(Rng& rng) const;
    [[nodiscard]] double generate_outcome(const Profile& p, double t, Rng& rng) const;

    /// Names of the continuous and binary markers, in column order.
    [[nodiscard]] std::vector<std::string> continuous_names() const;
    [[nodiscard]] std::vector<std::string> binary_names() const;
    /// Markers that interact with treatment, sorted by name.
    [[nodiscard]] std::vector<std::string> true_tailoring() const;

    [[nodiscard]] double default_alpha() const { return study == Study::I ? 0.3 : 0.2; }
    [[nodiscard]] double default_lambda1() const { return study == Study::I ? 0.1 : 0.01; }
};

/// Every registered id: study1/s1..s8, study2/s1..s8, study1-nopred/s1..s8.
std::vector<std::string> scenario_ids();

/// Throws std::invalid_argument for an unknown id.
Scenario find_scenario(std::string_view id);

struct GroundTruth {
    double prevalence = 0.0;
    double delta = 0.0;  // 0 when no profile has gamma > 0
};

/// Monte Carlo prevalence of {gamma > 0} and mean gamma over that set.
GroundTruth monte_carlo_ground_truth(const Scenario& scenario, int draws, Rng& rng);

}  // namespace fkbma
