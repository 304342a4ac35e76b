#include "fkbma/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fkbma {

namespace {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Reference {
    double prevalence;
    double delta;
};

constexpr Reference kStudyI[8] = {{0.0, 0.0},  {1.0, 0.28}, {0.35, 0.70}, {0.50, 0.56},
                                  {0.65, 0.50}, {0.48, 0.81}, {0.50, 0.58}, {0.50, 0.64}};
constexpr Reference kStudyII[8] = {{0.0, 0.0},  {1.0, 0.35}, {0.50, 0.58}, {0.50, 0.64},
                                   {0.51, 0.71}, {0.40, 0.77}, {0.60, 0.64}, {0.50, 0.79}};

}  // namespace

double Scenario::true_gamma(std::span<const double> x, std::span<const double> z) const {
    if (study == Study::I) {
        switch (number) {
            case 1: return 0.0;
            case 2: return 0.28;
            case 3: return z[0] - 0.3;
            case 4: return 0.7 * z[1] - 0.14;
            case 5: return 0.8 * z[2] - 0.3;
            case 6: return 0.9 * z[3] + 0.9 * z[0] - 0.2;
            case 7: return 2.3 * x[0] - 1.15;
            case 8: return std::cos(kTwoPi * x[0]);
        }
    } else {
        const double x1 = x[0];
        switch (number) {
            case 1: return 0.0;
            case 2: return 0.35;
            case 3: return 2.3 * x1 - 1.15;
            case 4: return std::cos(kTwoPi * x1);
            case 5: return 1.4 * logistic(25.0 * (x1 - 0.5)) - 0.6;
            case 6:
                return x1 <= 0.5 ? 2.0 * logistic(30.0 * (x1 - 0.3)) - 1.0
                                 : 2.0 / (1.0 + std::exp(30.0 * (x1 - 0.7))) - 1.0;
            case 7:
                return x1 <= 0.5 ? 1.5 / (1.0 + std::exp(30.0 * (x1 - 0.3))) - 0.75
                                 : 1.5 * logistic(30.0 * (x1 - 0.7)) - 0.75;
            case 8: return 2.3 * x1 + std::cos(kTwoPi * x[1]) - 1.15;
        }
    }
    throw std::logic_error("scenario number out of range");
}

double Scenario::true_main(std::span<const double> x, std::span<const double> z) const {
    if (study == Study::II) return 0.5 * x[0];
    if (!predictive_effects) return 0.0;
    switch (number) {
        case 3: return 0.5 * z[0];
        case 4: return 0.5 * z[1];
        case 5: return 0.5 * z[2];
        case 6: return 0.3 * z[0] + 0.5 * z[3];
        case 7:
        case 8: return 0.3 * x[0];
        default: return 0.0;
    }
}

Profile Scenario::generate_patient(Rng& rng) const {
    Profile p;
    p.x.resize(static_cast<std::size_t>(continuous_count));
    for (auto& v : p.x) v = uniform01(rng);
    p.z.resize(binary_prevalences.size());
    for (std::size_t j = 0; j < binary_prevalences.size(); ++j) p.z[j] = uniform01(rng) < binary_prevalences[j] ? 1.0 : 0.0;
    return p;
}

double Scenario::generate_outcome(const Profile& p, double t, Rng& rng) const {
    return true_main(p) + true_gamma(p) * t + noise_sd * standard_normal(rng);
}

std::vector<std::string> Scenario::continuous_names() const {
    if (study == Study::I) return {"x"};
    return {"x1", "x2"};
}

std::vector<std::string> Scenario::binary_names() const {
    if (study == Study::I) return {"z1", "z2", "z3", "z4", "z5"};
    return {};
}

std::vector<std::string> Scenario::true_tailoring() const {
    std::vector<std::string> out;
    if (study == Study::I) {
        switch (number) {
            case 3: out = {"z1"}; break;
            case 4: out = {"z2"}; break;
            case 5: out = {"z3"}; break;
            case 6: out = {"z1", "z4"}; break;
            case 7:
            case 8: out = {"x"}; break;
            default: break;
        }
    } else {
        if (number >= 3 && number <= 7) out = {"x1"};
        if (number == 8) out = {"x1", "x2"};
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> scenario_ids() {
    std::vector<std::string> ids;
    for (const char* prefix : {"study1", "study2", "study1-nopred"})
        for (int s = 1; s <= 8; ++s) ids.push_back(std::string(prefix) + "/s" + std::to_string(s));
    return ids;
}

Scenario find_scenario(std::string_view id) {
    const auto slash = id.find('/');
    if (slash == std::string_view::npos) throw std::invalid_argument("unknown scenario id: " + std::string(id));
    const auto prefix = id.substr(0, slash);
    const auto rest = id.substr(slash + 1);
    if (rest.size() != 2 || rest[0] != 's' || rest[1] < '1' || rest[1] > '8')
        throw std::invalid_argument("unknown scenario id: " + std::string(id));
    Scenario s;
    s.id = std::string(id);
    s.number = rest[1] - '0';
    if (prefix == "study1" || prefix == "study1-nopred") {
        s.study = Study::I;
        s.predictive_effects = prefix == "study1";
        s.binary_prevalences = {0.35, 0.50, 0.65, 0.20, 0.35};
        s.continuous_count = 1;
        s.reference_prevalence = kStudyI[s.number - 1].prevalence;
        s.reference_delta = kStudyI[s.number - 1].delta;
    } else if (prefix == "study2") {
        s.study = Study::II;
        s.continuous_count = 2;
        s.reference_prevalence = kStudyII[s.number - 1].prevalence;
        s.reference_delta = kStudyII[s.number - 1].delta;
    } else {
        throw std::invalid_argument("unknown scenario id: " + std::string(id));
    }
    return s;
}

GroundTruth monte_carlo_ground_truth(const Scenario& scenario, int draws, Rng& rng) {
    if (draws < 1) throw std::invalid_argument("at least one draw required");
    long long hits = 0;
    double sum = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double g = scenario.true_gamma(scenario.generate_patient(rng));
        if (g > 0) {
            ++hits;
            sum += g;
        }
    }
    return {static_cast<double>(hits) / draws, hits > 0 ? sum / static_cast<double>(hits) : 0.0};
}

}  // namespace fkbma
