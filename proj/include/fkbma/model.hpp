#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fkbma/spline_basis.hpp"

namespace fkbma {

/// Boundary interval and candidate knot grid of one continuous biomarker.
struct SplineDomain {
    Interval boundary;
    std::vector<double> candidates;
};

enum class TermKind { SplineMain, BinaryMain, SplineTailoring, BinaryTailoring };

/// One biomarker term of the full model.
struct Term {
    TermKind kind;
    int column;       // column of X (spline terms) or Z (binary terms)
    int slot;         // spline slot for spline terms; index into beta1 / beta2 for binary terms
    int partner = -1; // tailoring term -> its main effect; main effect -> its tailoring term (or -1)

    [[nodiscard]] bool is_spline() const noexcept {
        return kind == TermKind::SplineMain || kind == TermKind::SplineTailoring;
    }
    [[nodiscard]] bool is_tailoring() const noexcept {
        return kind == TermKind::SplineTailoring || kind == TermKind::BinaryTailoring;
    }
};

/// Which columns of the biomarker matrices enter the model, and in which role.
///
/// Terms are ordered as the saturated design: spline main effects, binary main
/// effects, spline tailoring effects, binary tailoring effects.
class CandidateSet {
public:
    CandidateSet() = default;
    CandidateSet(std::vector<int> predictive_continuous, std::vector<int> predictive_binary,
                 std::vector<int> tailoring_continuous, std::vector<int> tailoring_binary,
                 std::vector<SplineDomain> domains);

    [[nodiscard]] const std::vector<int>& predictive_continuous() const noexcept { return pred_cont_; }
    [[nodiscard]] const std::vector<int>& predictive_binary() const noexcept { return pred_bin_; }
    [[nodiscard]] const std::vector<int>& tailoring_continuous() const noexcept { return tail_cont_; }
    [[nodiscard]] const std::vector<int>& tailoring_binary() const noexcept { return tail_bin_; }
    /// Indexed by column of X.
    [[nodiscard]] const std::vector<SplineDomain>& domains() const noexcept { return domains_; }

    [[nodiscard]] const std::vector<Term>& terms() const noexcept { return terms_; }
    [[nodiscard]] int p() const noexcept { return static_cast<int>(terms_.size()); }
    [[nodiscard]] int spline_slots() const noexcept { return static_cast<int>(spline_terms_.size()); }
    [[nodiscard]] int spline_term(int slot) const { return spline_terms_.at(slot); }
    [[nodiscard]] int spline_column(int slot) const { return terms_[spline_term(slot)].column; }
    [[nodiscard]] const SplineDomain& spline_domain(int slot) const { return domains_.at(spline_column(slot)); }

private:
    std::vector<int> pred_cont_, pred_bin_, tail_cont_, tail_bin_;
    std::vector<SplineDomain> domains_;
    std::vector<Term> terms_;
    std::vector<int> spline_terms_;
};

struct Dataset {
    Eigen::VectorXd y;
    Eigen::VectorXd t;  // 0/1
    Eigen::MatrixXd x;  // continuous biomarkers, n x (number of continuous columns)
    Eigen::MatrixXd z;  // binary biomarkers, n x (number of binary columns)
    CandidateSet candidates;

    [[nodiscard]] Eigen::Index n() const noexcept { return y.size(); }
    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;
};

struct ModelState {
    double mu = 0.0;
    double phi = 0.0;
    std::vector<Eigen::VectorXd> theta;  // per spline slot, length k_s + 3
    Eigen::VectorXd beta1;               // per predictive binary term
    Eigen::VectorXd beta2;               // per tailoring binary term
    std::vector<std::uint8_t> omega;     // per term
    std::vector<KnotState> knots;        // per spline slot
    double sigma_tau = 1.0;

    [[nodiscard]] int active_terms() const;
};

struct PriorConfig {
    double lambda1 = 0.1;
    double lambda2 = 1.0;
    double sigma_B = 10.0;
    double a0 = 0.1;
    double b0 = 0.1;

    void validate() const;
};

/// State with every term inactive, no knots and zero coefficients.
ModelState empty_state(const CandidateSet& candidates);

bool hierarchy_holds(const CandidateSet& candidates, std::span<const std::uint8_t> omega);

/// Empty string when the state satisfies every structural invariant.
std::string state_violation(const CandidateSet& candidates, const ModelState& state);

/// Column widths of each term (d_s for splines, 1 for binary terms).
std::vector<int> term_widths(const CandidateSet& candidates, std::span<const KnotState> knots);

/// First saturated-design column of each term; entry p() is the total column count.
std::vector<int> term_offsets(const CandidateSet& candidates, std::span<const KnotState> knots);

/// Basis block of one spline slot; tailoring blocks have rows with T = 0 zeroed.
Eigen::MatrixXd spline_block(const Dataset& data, int slot, const KnotState& knots);

Eigen::MatrixXd assemble_saturated_design(const Dataset& data, std::span<const KnotState> knots);

/// Expands term indicators to one indicator per saturated-design column,
/// with the intercept and treatment columns always on.
std::vector<std::uint8_t> augment_inclusion(const CandidateSet& candidates, std::span<const std::uint8_t> omega,
                                            std::span<const int> widths);

Eigen::MatrixXd active_design(const Eigen::MatrixXd& saturated, std::span<const std::uint8_t> omega_coef);

/// Coefficients in saturated-design column order.
Eigen::VectorXd pack_coefficients(const CandidateSet& candidates, const ModelState& state);
void unpack_coefficients(const CandidateSet& candidates, const Eigen::VectorXd& zeta, ModelState& state);

Eigen::VectorXd fitted_values(const Dataset& data, const ModelState& state);

/// Gaussian log-likelihood from a residual sum of squares.
double gaussian_log_likelihood(double ssr, Eigen::Index n, double sigma);

double log_likelihood(const Dataset& data, const ModelState& state);

/// Log density of the independent N(0, sigma_B^2) coefficient prior.
double log_normal_prior(const Eigen::Ref<const Eigen::VectorXd>& coefficients, double sigma_B);

/// Log prior up to constants that cancel in every acceptance ratio.
///
/// Knot priors are included for every spline slot, active or not: knot sets of
/// inactive terms are part of the sampled state and keep their prior.
double log_prior(const CandidateSet& candidates, const ModelState& state, const PriorConfig& prior);

double log_choose(int n, int k);

/// Blip function at tailoring covariates, ordered as tailoring_continuous() /
/// tailoring_binary(). Throws when a continuous value is outside its boundary.
double gamma_at(const CandidateSet& candidates, std::span<const double> xt, std::span<const double> zt,
                const ModelState& state);

}  // namespace fkbma
