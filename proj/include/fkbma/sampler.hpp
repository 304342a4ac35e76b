#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fkbma/model.hpp"
#include "fkbma/rng.hpp"

namespace fkbma {

struct SamplerConfig {
    int burn_in = 30000;
    int n_samples = 2000;
    int thin = 10;
    double b = 0.5;  // knot birth probability
    double c = 0.5;  // term birth probability
    std::optional<double> w;  // knot-move window half-width; default 2 x median candidate spacing
    double sigma_v = 0.5;
    double sigma_u = 0.5;
    double sigma_eps = 0.15;

    // Test hooks. With fix_sigma_tau set the Gibbs step is skipped.
    std::optional<double> fix_sigma_tau;
    bool enable_knot_moves = true;  // Steps 1(a) and 1(b)
    bool enable_term_moves = true;  // Step 2

    void validate() const;
    [[nodiscard]] long long total_iterations() const {
        return static_cast<long long>(burn_in) + static_cast<long long>(n_samples) * thin;
    }
};

enum class Move { KnotMove, KnotBirth, KnotDeath, SplineCoefficients, TermBirth, TermDeath, FixedCoefficients };
inline constexpr std::size_t kMoveCount = 7;
std::string_view move_name(Move move);

struct AcceptanceCounter {
    long long attempted = 0;
    long long accepted = 0;
    [[nodiscard]] double rate() const { return attempted > 0 ? static_cast<double>(accepted) / attempted : 0.0; }
};

struct PosteriorDraws {
    CandidateSet candidates;
    std::vector<ModelState> states;
    std::array<AcceptanceCounter, kMoveCount> acceptance{};
};

struct EligibleTerms {
    std::vector<int> addable;
    std::vector<int> removable;
};

/// Terms that can be added or removed without breaking the main-effect /
/// interaction hierarchy.
EligibleTerms eligible_terms(const CandidateSet& candidates, std::span<const std::uint8_t> omega);

// Log of the simplified ratio factors of the reversible-jump moves.
double knot_move_log_proposal_ratio(int vacant_near_old, int vacant_near_new);
double knot_birth_log_prior_ratio(double lambda2, int candidate_count, int knot_count);
double knot_death_log_prior_ratio(double lambda2, int candidate_count, int knot_count);
double knot_birth_log_proposal_ratio(int candidate_count, int knot_count);
double knot_death_log_proposal_ratio(int candidate_count, int knot_count);
double term_birth_log_prior_ratio(double lambda1, int p, int m);
double term_death_log_prior_ratio(double lambda1, int p, int m);

/// Least squares through the normal equations; retries with 1e-8 added to the
/// diagonal when the Cholesky factorization fails. nullopt if still singular.
std::optional<Eigen::VectorXd> solve_normal_equations(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs);
std::optional<Eigen::VectorXd> least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& response);

/// Shifts coefficients shared by both designs by (new fit - old fit) and sets
/// newborn ones (new_to_old[i] < 0) to the next jump plus their new-fit value.
Eigen::VectorXd shift_by_fits(const Eigen::VectorXd& current, const Eigen::VectorXd& old_fit,
                              const Eigen::VectorXd& new_fit, std::span<const int> new_to_old,
                              const Eigen::VectorXd& jumps);

std::optional<Eigen::VectorXd> glm_augment(const Eigen::VectorXd& current, const Eigen::MatrixXd& design_old,
                                           const Eigen::MatrixXd& design_new, const Eigen::VectorXd& response,
                                           std::span<const int> new_to_old, const Eigen::VectorXd& jumps);

/// Shape and scale of the Inverse-Gamma full conditional of the residual variance.
std::pair<double, double> variance_conditional(Eigen::Index n, double ssr, const PriorConfig& prior);

/// Full model, zero knots, coefficients and residual scale at their least squares values.
ModelState ols_initial_state(const Dataset& data);

/// Reversible-jump sampler over term inclusion, knot sets and coefficients.
///
/// Knot sets of inactive spline terms are kept and reused when the term is
/// born again, so a term birth adds k_s + 3 coefficients.
class Sampler {
public:
    Sampler(const Dataset& data, PriorConfig prior, SamplerConfig config, ModelState initial);
    Sampler(const Dataset& data, PriorConfig prior, SamplerConfig config);

    [[nodiscard]] const ModelState& state() const noexcept { return state_; }
    [[nodiscard]] const std::array<AcceptanceCounter, kMoveCount>& acceptance() const noexcept { return counters_; }
    [[nodiscard]] double window(int slot) const { return windows_.at(slot); }
    [[nodiscard]] double residual_sum_of_squares() const noexcept { return ssr_; }
    [[nodiscard]] double log_posterior() const;

    void step_knot_move(int slot, Rng& rng);
    void step_knot_birth_death(int slot, Rng& rng);
    void step_spline_coef_update(int slot, Rng& rng);
    void step_term_birth_death(Rng& rng);
    void step_fixed_coef_update(Rng& rng);
    void step_sigma_gibbs(Rng& rng);

    /// One sweep: Steps 1(a)-(c) for each active spline term, then 2, 3 and 4.
    void iterate(Rng& rng);

    /// Runs burn-in plus n_samples * thin sweeps and keeps every thin-th state
    /// after burn-in. The observer, when given, sees the state after every sweep.
    PosteriorDraws run(Rng& rng, const std::function<void(const ModelState&)>& observer = {});

private:
    [[nodiscard]] Eigen::MatrixXd make_block(int slot, const KnotState& knots) const;
    [[nodiscard]] Eigen::MatrixXd design_for(std::span<const std::uint8_t> omega) const;
    [[nodiscard]] Eigen::VectorXd coefficients_for(std::span<const std::uint8_t> omega) const;
    void store_coefficients(std::span<const std::uint8_t> omega, const Eigen::VectorXd& zeta);
    [[nodiscard]] double log_lik(double ssr) const;
    bool accept(double log_alpha, Rng& rng);
    void refresh_fit();

    const Dataset& data_;
    PriorConfig prior_;
    SamplerConfig config_;
    ModelState state_;
    std::vector<Eigen::MatrixXd> blocks_;      // current basis block of every spline slot
    std::vector<Eigen::VectorXd> binary_cols_;  // design column of every binary term (by term index)
    std::vector<double> windows_;
    Eigen::VectorXd fitted_;
    double ssr_ = 0.0;
    long long sweeps_ = 0;
    std::array<AcceptanceCounter, kMoveCount> counters_{};
};

PosteriorDraws run_chain(const Dataset& data, const PriorConfig& prior, const SamplerConfig& config, Rng& rng);

}  // namespace fkbma
