#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fkbma/sampler.hpp"

namespace fkbma {

/// Effective subspace: profiles whose posterior probability of gamma > e1
/// exceeds 1 - alpha.
struct SubspaceModel {
    const PosteriorDraws* draws = nullptr;
    double e1 = 0.0;
    double alpha = 0.3;

    void validate() const;
};

struct DecisionThresholds {
    double b1 = 0.0;
    double b2 = 0.0;
    double B1 = 0.975;
    double B2 = 0.8;
    double pi = 0.1;

    void validate() const;
};

enum class Decision { Efficacy, Futility, Continue };
std::string_view decision_name(Decision d);

/// Blip draws at a set of profiles: rows are profiles (rows of X / Z, full
/// covariate columns), columns are retained draws. With clamp set, continuous
/// values outside a spline boundary are moved onto it; otherwise they throw.
Eigen::MatrixXd gamma_matrix(const PosteriorDraws& draws, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                             bool clamp);

/// Posterior probability of gamma > e1 for each profile. Profiles are processed
/// in chunks so memory stays bounded for large external sets.
std::vector<double> exceedance_probability(const PosteriorDraws& draws, const Eigen::MatrixXd& x,
                                           const Eigen::MatrixXd& z, double e1, bool clamp);

bool membership(const SubspaceModel& subspace, std::span<const double> x, std::span<const double> z,
                bool clamp = false);
std::vector<std::uint8_t> membership(const SubspaceModel& subspace, const Eigen::MatrixXd& x,
                                     const Eigen::MatrixXd& z, bool clamp = false);

double prevalence(std::span<const std::uint8_t> members);
double prevalence(const SubspaceModel& subspace, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                  bool clamp = false);

/// Per retained draw, the mean blip over member profiles.
std::vector<double> enriched_effect_draws(const Eigen::MatrixXd& gamma, std::span<const std::uint8_t> members);
std::vector<double> enriched_effect_draws(const SubspaceModel& subspace, const Eigen::MatrixXd& x,
                                          const Eigen::MatrixXd& z, bool clamp = false);

Decision decide(std::span<const double> delta_draws, const DecisionThresholds& thresholds);

/// Fraction of retained draws with each term active.
std::vector<double> inclusion_probabilities(const PosteriorDraws& draws);

/// A biomarker, identified by its type and its column in X (continuous) or Z (binary).
struct Variable {
    bool continuous = false;
    int column = 0;
    auto operator<=>(const Variable&) const = default;
};

/// Variables whose largest term-inclusion probability reaches `cutoff`.
std::vector<Variable> retained_variables(const PosteriorDraws& draws, double cutoff);

/// Variables whose tailoring-term inclusion probability reaches `cutoff`.
std::vector<Variable> tailoring_variables(const PosteriorDraws& draws, double cutoff);

/// Geweke z-score comparing the first and last quarter of a trace, each with a
/// batch-means standard error (20 batches, floored at 1e-12).
double geweke(std::span<const double> trace);

/// Largest |z| over phi and the blip trace of every profile.
double max_geweke(const PosteriorDraws& draws, const Eigen::MatrixXd& gamma);

inline constexpr double kGewekeLimit = 4.0;

}  // namespace fkbma
