#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fkbma/posterior.hpp"
#include "fkbma/scenario.hpp"

namespace fkbma {

struct InterimSchedule {
    std::vector<int> analysis_sizes{300, 500};  // cumulative; last entry is the maximum sample size

    void validate() const;
    [[nodiscard]] int max_n() const { return analysis_sizes.back(); }
};

struct TrialDesign {
    DecisionThresholds thresholds;
    double e1 = 0.0;
    double alpha = 0.3;
    PriorConfig prior;
    SamplerConfig sampler;
    InterimSchedule schedule;
    int candidate_knots = 9;
    double treatment_probability = 0.5;
    double prune_cutoff = 0.1;

    void validate() const;
};

enum class Verdict { EfficacyInSubgroup, EfficacyOverall, Futility, NotSuperior };
std::string_view verdict_name(Verdict v);
[[nodiscard]] inline bool is_efficacy(Verdict v) {
    return v == Verdict::EfficacyInSubgroup || v == Verdict::EfficacyOverall;
}

/// Patients enrolled so far, with raw (unclamped) covariates.
struct Cohort {
    Eigen::MatrixXd x;
    Eigen::MatrixXd z;
    Eigen::VectorXd t;
    Eigen::VectorXd y;

    [[nodiscard]] Eigen::Index size() const { return y.size(); }
    void append(const Cohort& other);
};

/// Screening rule for restricted enrollment: membership with covariates clamped
/// onto the spline boundaries.
struct Restriction {
    SubspaceModel subspace;
};

/// Draws `count` patients, rejection-sampling against the restriction when
/// present, randomizes treatment and generates outcomes.
Cohort enroll(const Scenario& scenario, const Restriction* restriction, int count, Rng& rng,
              double treatment_probability = 0.5);

struct TrialResult {
    int stop_stage = 0;  // 1-based index into the analysis schedule
    Verdict verdict = Verdict::NotSuperior;
    PosteriorDraws final_draws;
    int enrolled_n = 0;
    std::vector<std::string> selected_variables;  // sorted marker names
    std::vector<bool> convergence_flags;          // one per fit
    std::vector<double> max_abs_geweke;           // one per fit
    std::vector<double> stagewise_prevalence;
    double e1 = 0.0;
    double alpha = 0.3;
};

/// Candidate set with every marker of the scenario as both predictive and
/// tailoring variable, with boundaries and candidate knots taken from `stage1`.
CandidateSet full_candidate_set(const Scenario& scenario, const Cohort& stage1, int knot_count);

/// Candidate set keeping only the listed variables.
CandidateSet reduced_candidate_set(const CandidateSet& full, const std::vector<Variable>& predictive,
                                   const std::vector<Variable>& tailoring);

/// Dataset over a cohort with continuous markers clamped onto the spline boundaries.
Dataset make_dataset(const Cohort& cohort, const CandidateSet& candidates);

TrialResult run_trial(const Scenario& scenario, const TrialDesign& design, Rng& rng);

enum class Action { Treat, Control };

Action recommend(const TrialResult& result, std::span<const double> x, std::span<const double> z);
/// Batch form over profile rows.
std::vector<Action> recommend(const TrialResult& result, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z);

}  // namespace fkbma
