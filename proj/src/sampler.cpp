#include "fkbma/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace fkbma {

namespace {

double log_normal_density(double v, double sd) {
    return -0.5 * std::log(2.0 * std::numbers::pi * sd * sd) - v * v / (2.0 * sd * sd);
}

double log_normal_density(const Eigen::VectorXd& v, double sd) {
    double out = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) out += log_normal_density(v[i], sd);
    return out;
}

Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index n, double sd) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = sd * standard_normal(rng);
    return v;
}

// Position of `knot` among the active knots in sorted order.
int sorted_rank(const KnotState& knots, int knot) {
    int rank = 0;
    for (int i = 0; i < knot; ++i) rank += knots.is_active(i) ? 1 : 0;
    return rank;
}

// Coefficient slot that is born with a knot inserted at sorted position `rank`.
int newborn_coefficient(int rank) { return rank + 1; }

Eigen::VectorXd select(const Eigen::VectorXd& v, std::span<const int> idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
    return out;
}

Eigen::MatrixXd select(const Eigen::MatrixXd& m, std::span<const int> idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < idx.size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(idx[i], idx[j]);
    return out;
}

}  // namespace

void SamplerConfig::validate() const {
    if (!(b > 0 && b < 1)) throw std::invalid_argument("knot birth probability b must lie in (0,1)");
    if (!(c > 0 && c < 1)) throw std::invalid_argument("term birth probability c must lie in (0,1)");
    if (!(sigma_v > 0) || !(sigma_u > 0) || !(sigma_eps > 0))
        throw std::invalid_argument("proposal standard deviations must be positive");
    if (w && !(*w > 0)) throw std::invalid_argument("knot window w must be positive");
    if (burn_in < 1 || n_samples < 1 || thin < 1)
        throw std::invalid_argument("burn_in, n_samples and thin must be at least 1");
    if (fix_sigma_tau && !(*fix_sigma_tau > 0)) throw std::invalid_argument("fixed sigma_tau must be positive");
}

std::string_view move_name(Move move) {
    switch (move) {
        case Move::KnotMove: return "knot_move";
        case Move::KnotBirth: return "knot_birth";
        case Move::KnotDeath: return "knot_death";
        case Move::SplineCoefficients: return "spline_coefficients";
        case Move::TermBirth: return "term_birth";
        case Move::TermDeath: return "term_death";
        case Move::FixedCoefficients: return "fixed_coefficients";
    }
    return "unknown";
}

EligibleTerms eligible_terms(const CandidateSet& candidates, std::span<const std::uint8_t> omega) {
    EligibleTerms out;
    const auto& terms = candidates.terms();
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const auto& term = terms[i];
        const int idx = static_cast<int>(i);
        if (term.is_tailoring()) {
            if (omega[i]) out.removable.push_back(idx);
            else if (omega[term.partner]) out.addable.push_back(idx);
        } else {
            if (!omega[i]) out.addable.push_back(idx);
            else if (term.partner < 0 || !omega[term.partner]) out.removable.push_back(idx);
        }
    }
    std::sort(out.removable.begin(), out.removable.end());
    return out;
}

double knot_move_log_proposal_ratio(int vacant_near_old, int vacant_near_new) {
    return std::log(static_cast<double>(vacant_near_old)) - std::log(static_cast<double>(vacant_near_new));
}

double knot_birth_log_prior_ratio(double lambda2, int candidate_count, int knot_count) {
    return std::log(lambda2) - std::log(static_cast<double>(candidate_count - knot_count));
}

double knot_death_log_prior_ratio(double lambda2, int candidate_count, int knot_count) {
    return std::log(static_cast<double>(candidate_count - knot_count + 1)) - std::log(lambda2);
}

double knot_birth_log_proposal_ratio(int candidate_count, int knot_count) {
    return std::log(static_cast<double>(candidate_count - knot_count)) - std::log(knot_count + 1.0);
}

double knot_death_log_proposal_ratio(int candidate_count, int knot_count) {
    return std::log(static_cast<double>(knot_count)) -
           std::log(static_cast<double>(candidate_count - knot_count + 1));
}

double term_birth_log_prior_ratio(double lambda1, int p, int m) {
    return std::log(lambda1) - std::log(static_cast<double>(p - m));
}

double term_death_log_prior_ratio(double lambda1, int p, int m) {
    return std::log(static_cast<double>(p - m + 1)) - std::log(lambda1);
}

std::optional<Eigen::VectorXd> solve_normal_equations(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs) {
    if (gram.rows() == 0) return Eigen::VectorXd(0);
    auto try_solve = [&](const Eigen::MatrixXd& g) -> std::optional<Eigen::VectorXd> {
        Eigen::LLT<Eigen::MatrixXd> llt(g);
        if (llt.info() != Eigen::Success) return std::nullopt;
        Eigen::VectorXd sol = llt.solve(rhs);
        if (!sol.allFinite()) return std::nullopt;
        return sol;
    };
    if (auto sol = try_solve(gram)) return sol;
    Eigen::MatrixXd jittered = gram;
    jittered.diagonal().array() += 1e-8;
    return try_solve(jittered);
}

std::optional<Eigen::VectorXd> least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(design.cols(), design.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    return solve_normal_equations(gram, design.transpose() * response);
}

Eigen::VectorXd shift_by_fits(const Eigen::VectorXd& current, const Eigen::VectorXd& old_fit,
                              const Eigen::VectorXd& new_fit, std::span<const int> new_to_old,
                              const Eigen::VectorXd& jumps) {
    Eigen::VectorXd out(new_fit.size());
    Eigen::Index next_jump = 0;
    for (Eigen::Index i = 0; i < new_fit.size(); ++i) {
        const int src = new_to_old[i];
        if (src >= 0) out[i] = current[src] + new_fit[i] - old_fit[src];
        else out[i] = jumps[next_jump++] + new_fit[i];
    }
    return out;
}

std::optional<Eigen::VectorXd> glm_augment(const Eigen::VectorXd& current, const Eigen::MatrixXd& design_old,
                                           const Eigen::MatrixXd& design_new, const Eigen::VectorXd& response,
                                           std::span<const int> new_to_old, const Eigen::VectorXd& jumps) {
    if (design_old.cols() != current.size() || static_cast<Eigen::Index>(new_to_old.size()) != design_new.cols())
        throw std::invalid_argument("glm_augment: dimension mismatch");
    auto old_fit = least_squares(design_old, response);
    auto new_fit = least_squares(design_new, response);
    if (!old_fit || !new_fit) return std::nullopt;
    return shift_by_fits(current, *old_fit, *new_fit, new_to_old, jumps);
}

std::pair<double, double> variance_conditional(Eigen::Index n, double ssr, const PriorConfig& prior) {
    return {static_cast<double>(n) / 2.0 + prior.a0, ssr / 2.0 + prior.b0};
}

ModelState ols_initial_state(const Dataset& data) {
    const auto& cands = data.candidates;
    ModelState state = empty_state(cands);
    std::fill(state.omega.begin(), state.omega.end(), std::uint8_t{1});
    const Eigen::MatrixXd Z = assemble_saturated_design(data, state.knots);
    auto zeta = least_squares(Z, data.y);
    if (!zeta) throw std::runtime_error("initial least squares fit is singular");
    unpack_coefficients(cands, *zeta, state);
    const double ssr = (data.y - Z * *zeta).squaredNorm();
    const auto dof = std::max<Eigen::Index>(data.n() - Z.cols(), 1);
    state.sigma_tau = std::sqrt(std::max(ssr / static_cast<double>(dof), 1e-12));
    return state;
}

Sampler::Sampler(const Dataset& data, PriorConfig prior, SamplerConfig config, ModelState initial)
    : data_(data), prior_(prior), config_(std::move(config)), state_(std::move(initial)) {
    prior_.validate();
    config_.validate();
    const auto& cands = data_.candidates;
    if (auto why = state_violation(cands, state_); !why.empty())
        throw std::invalid_argument("invalid initial state: " + why);
    if (config_.fix_sigma_tau) state_.sigma_tau = *config_.fix_sigma_tau;

    for (int slot = 0; slot < cands.spline_slots(); ++slot) {
        blocks_.push_back(make_block(slot, state_.knots[slot]));
        const auto& grid = cands.spline_domain(slot).candidates;
        double w = config_.w.value_or(2.0 * median_spacing(grid));
        if (!(w > 0)) {
            const auto& b = cands.spline_domain(slot).boundary;
            w = b.upper - b.lower;
        }
        windows_.push_back(w);
    }
    const auto& terms = cands.terms();
    binary_cols_.resize(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].kind == TermKind::BinaryMain) binary_cols_[i] = data_.z.col(terms[i].column);
        else if (terms[i].kind == TermKind::BinaryTailoring)
            binary_cols_[i] = data_.z.col(terms[i].column).cwiseProduct(data_.t);
    }
    refresh_fit();
}

Sampler::Sampler(const Dataset& data, PriorConfig prior, SamplerConfig config)
    : Sampler(data, prior, std::move(config), ols_initial_state(data)) {}

Eigen::MatrixXd Sampler::make_block(int slot, const KnotState& knots) const {
    return spline_block(data_, slot, knots);
}

void Sampler::refresh_fit() {
    const auto& terms = data_.candidates.terms();
    fitted_ = Eigen::VectorXd::Constant(data_.n(), state_.mu) + state_.phi * data_.t;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!state_.omega[i]) continue;
        const auto& term = terms[i];
        if (term.is_spline()) fitted_.noalias() += blocks_[term.slot] * state_.theta[term.slot];
        else if (term.kind == TermKind::BinaryMain) fitted_ += state_.beta1[term.slot] * binary_cols_[i];
        else fitted_ += state_.beta2[term.slot] * binary_cols_[i];
    }
    ssr_ = (data_.y - fitted_).squaredNorm();
}

double Sampler::log_lik(double ssr) const { return gaussian_log_likelihood(ssr, data_.n(), state_.sigma_tau); }

double Sampler::log_posterior() const {
    return log_lik(ssr_) + log_prior(data_.candidates, state_, prior_);
}

bool Sampler::accept(double log_alpha, Rng& rng) {
    if (std::isnan(log_alpha)) return false;
    if (log_alpha >= 0.0) return true;
    return std::log(uniform01(rng)) < log_alpha;
}

Eigen::MatrixXd Sampler::design_for(std::span<const std::uint8_t> omega) const {
    const auto& terms = data_.candidates.terms();
    Eigen::Index q = 2;
    for (std::size_t i = 0; i < terms.size(); ++i)
        if (omega[i]) q += terms[i].is_spline() ? blocks_[terms[i].slot].cols() : 1;
    Eigen::MatrixXd Z(data_.n(), q);
    Z.col(0).setOnes();
    Z.col(1) = data_.t;
    Eigen::Index col = 2;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!omega[i]) continue;
        if (terms[i].is_spline()) {
            const auto& block = blocks_[terms[i].slot];
            Z.middleCols(col, block.cols()) = block;
            col += block.cols();
        } else {
            Z.col(col++) = binary_cols_[i];
        }
    }
    return Z;
}

Eigen::VectorXd Sampler::coefficients_for(std::span<const std::uint8_t> omega) const {
    const auto& terms = data_.candidates.terms();
    std::vector<double> out{state_.mu, state_.phi};
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!omega[i]) continue;
        const auto& term = terms[i];
        if (term.is_spline()) {
            const auto& th = state_.theta[term.slot];
            out.insert(out.end(), th.data(), th.data() + th.size());
        } else if (term.kind == TermKind::BinaryMain) {
            out.push_back(state_.beta1[term.slot]);
        } else {
            out.push_back(state_.beta2[term.slot]);
        }
    }
    return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void Sampler::store_coefficients(std::span<const std::uint8_t> omega, const Eigen::VectorXd& zeta) {
    const auto& terms = data_.candidates.terms();
    state_.mu = zeta[0];
    state_.phi = zeta[1];
    Eigen::Index pos = 2;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const auto& term = terms[i];
        if (term.is_spline()) {
            auto& th = state_.theta[term.slot];
            if (omega[i]) {
                th = zeta.segment(pos, th.size());
                pos += th.size();
            } else {
                th.setZero();
            }
        } else {
            double& v = term.kind == TermKind::BinaryMain ? state_.beta1[term.slot] : state_.beta2[term.slot];
            v = omega[i] ? zeta[pos++] : 0.0;
        }
    }
}

void Sampler::step_knot_move(int slot, Rng& rng) {
    if (!state_.omega[data_.candidates.spline_term(slot)]) return;
    KnotState& knots = state_.knots[slot];
    if (knots.count() == 0) return;
    auto& counter = counters_[static_cast<std::size_t>(Move::KnotMove)];

    const auto active = knots.active_indices();
    const int moving = active[uniform_index(rng, static_cast<int>(active.size()))];
    const auto& grid = knots.candidates();
    const double w = windows_[slot];
    const auto vacant_old = knots.vacant_within(grid[moving], w);
    if (vacant_old.empty()) return;
    ++counter.attempted;
    const int target = vacant_old[uniform_index(rng, static_cast<int>(vacant_old.size()))];

    KnotState proposed = knots;
    proposed.deactivate(moving);
    proposed.activate(target);
    const auto vacant_new = proposed.vacant_within(grid[target], w);

    Eigen::MatrixXd block = make_block(slot, proposed);
    const auto& theta = state_.theta[slot];
    Eigen::VectorXd fitted = fitted_ + (block - blocks_[slot]) * theta;
    const double ssr = (data_.y - fitted).squaredNorm();
    const double log_alpha = log_lik(ssr) - log_lik(ssr_) +
                             knot_move_log_proposal_ratio(static_cast<int>(vacant_old.size()),
                                                          static_cast<int>(vacant_new.size()));
    if (accept(log_alpha, rng)) {
        knots = std::move(proposed);
        blocks_[slot] = std::move(block);
        fitted_ = std::move(fitted);
        ssr_ = ssr;
        ++counter.accepted;
    }
}

void Sampler::step_knot_birth_death(int slot, Rng& rng) {
    if (!state_.omega[data_.candidates.spline_term(slot)]) return;
    KnotState& knots = state_.knots[slot];
    const int K = knots.candidate_count();
    const int k = knots.count();
    const bool birth = uniform01(rng) < config_.b;
    auto& counter = counters_[static_cast<std::size_t>(birth ? Move::KnotBirth : Move::KnotDeath)];
    ++counter.attempted;
    if ((birth && k == K) || (!birth && k == 0)) return;

    KnotState proposed = knots;
    int changed;
    if (birth) {
        const auto vacant = knots.vacant_indices();
        changed = vacant[uniform_index(rng, static_cast<int>(vacant.size()))];
        proposed.activate(changed);
    } else {
        const auto active = knots.active_indices();
        changed = active[uniform_index(rng, static_cast<int>(active.size()))];
        proposed.deactivate(changed);
    }
    // Coefficient index of the basis function tied to the changed knot, in the larger configuration.
    const int j = newborn_coefficient(sorted_rank(birth ? proposed : knots, changed));

    const Eigen::MatrixXd& old_block = blocks_[slot];
    Eigen::MatrixXd new_block = make_block(slot, proposed);
    const Eigen::VectorXd& theta = state_.theta[slot];
    const Eigen::VectorXd offset = fitted_ - old_block * theta;
    const Eigen::VectorXd partial = data_.y - offset;

    auto old_fit = least_squares(old_block, partial);
    auto new_fit = least_squares(new_block, partial);
    if (!old_fit || !new_fit) return;

    const Eigen::Index d_new = new_block.cols();
    std::vector<int> new_to_old(static_cast<std::size_t>(d_new));
    Eigen::VectorXd theta_new;
    double log_jump;
    if (birth) {
        for (Eigen::Index i = 0, src = 0; i < d_new; ++i) new_to_old[i] = (i == j) ? -1 : static_cast<int>(src++);
        Eigen::VectorXd v(1);
        v[0] = config_.sigma_v * standard_normal(rng);
        theta_new = shift_by_fits(theta, *old_fit, *new_fit, new_to_old, v);
        log_jump = -log_normal_density(v[0], config_.sigma_v);
    } else {
        for (Eigen::Index i = 0; i < d_new; ++i) new_to_old[i] = static_cast<int>(i < j ? i : i + 1);
        theta_new = shift_by_fits(theta, *old_fit, *new_fit, new_to_old, Eigen::VectorXd());
        const double v = theta[j] - (*old_fit)[j];
        log_jump = log_normal_density(v, config_.sigma_v);
    }

    Eigen::VectorXd fitted = offset + new_block * theta_new;
    const double ssr = (data_.y - fitted).squaredNorm();
    double log_alpha = log_lik(ssr) - log_lik(ssr_) + log_normal_prior(theta_new, prior_.sigma_B) -
                       log_normal_prior(theta, prior_.sigma_B) + log_jump;
    if (birth) {
        log_alpha += knot_birth_log_prior_ratio(prior_.lambda2, K, k) + std::log((1.0 - config_.b) / config_.b) +
                     knot_birth_log_proposal_ratio(K, k);
    } else {
        log_alpha += knot_death_log_prior_ratio(prior_.lambda2, K, k) + std::log(config_.b / (1.0 - config_.b)) +
                     knot_death_log_proposal_ratio(K, k);
    }
    if (accept(log_alpha, rng)) {
        knots = std::move(proposed);
        blocks_[slot] = std::move(new_block);
        state_.theta[slot] = std::move(theta_new);
        fitted_ = std::move(fitted);
        ssr_ = ssr;
        ++counter.accepted;
    }
}

void Sampler::step_spline_coef_update(int slot, Rng& rng) {
    if (!state_.omega[data_.candidates.spline_term(slot)]) return;
    auto& counter = counters_[static_cast<std::size_t>(Move::SplineCoefficients)];
    ++counter.attempted;
    const Eigen::VectorXd& theta = state_.theta[slot];
    const Eigen::VectorXd eps = normal_vector(rng, theta.size(), config_.sigma_eps);
    Eigen::VectorXd theta_new = theta + eps;
    Eigen::VectorXd fitted = fitted_ + blocks_[slot] * eps;
    const double ssr = (data_.y - fitted).squaredNorm();
    const double log_alpha = log_lik(ssr) - log_lik(ssr_) + log_normal_prior(theta_new, prior_.sigma_B) -
                             log_normal_prior(theta, prior_.sigma_B);
    if (accept(log_alpha, rng)) {
        state_.theta[slot] = std::move(theta_new);
        fitted_ = std::move(fitted);
        ssr_ = ssr;
        ++counter.accepted;
    }
}

void Sampler::step_term_birth_death(Rng& rng) {
    const auto& cands = data_.candidates;
    const auto& terms = cands.terms();
    const int p = cands.p();
    const int m = state_.active_terms();
    const bool birth = uniform01(rng) < config_.c;
    auto& counter = counters_[static_cast<std::size_t>(birth ? Move::TermBirth : Move::TermDeath)];
    ++counter.attempted;

    const EligibleTerms eligible = eligible_terms(cands, state_.omega);
    const auto& pool = birth ? eligible.addable : eligible.removable;
    if (pool.empty()) return;
    const int chosen = pool[uniform_index(rng, static_cast<int>(pool.size()))];

    std::vector<std::uint8_t> omega_new = state_.omega;
    omega_new[chosen] = birth ? 1 : 0;
    const EligibleTerms eligible_new = eligible_terms(cands, omega_new);

    // The larger of the two models holds every coefficient involved.
    const auto& omega_big = birth ? omega_new : state_.omega;
    const Eigen::MatrixXd Z = design_for(omega_big);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(Z.cols(), Z.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose());
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    const Eigen::VectorXd rhs = Z.transpose() * data_.y;

    // Columns of the chosen term inside Z.
    Eigen::Index start = 2;
    for (int i = 0; i < chosen; ++i)
        if (omega_big[i]) start += terms[i].is_spline() ? blocks_[terms[i].slot].cols() : 1;
    const Eigen::Index width = terms[chosen].is_spline() ? blocks_[terms[chosen].slot].cols() : 1;
    std::vector<int> small_cols;
    std::vector<int> all_cols;
    for (Eigen::Index col = 0; col < Z.cols(); ++col) {
        all_cols.push_back(static_cast<int>(col));
        if (col < start || col >= start + width) small_cols.push_back(static_cast<int>(col));
    }
    auto big_fit = solve_normal_equations(gram, rhs);
    auto small_fit = solve_normal_equations(select(gram, small_cols), select(rhs, small_cols));
    if (!big_fit || !small_fit) return;

    const Eigen::VectorXd zeta = coefficients_for(state_.omega);
    Eigen::VectorXd zeta_big_new;  // proposal expressed on the big model's columns
    Eigen::VectorXd zeta_small;    // small-model coefficients (current for birth, proposed for death)
    double log_jump;
    if (birth) {
        std::vector<int> new_to_old(all_cols.size());
        for (std::size_t i = 0, src = 0; i < all_cols.size(); ++i) {
            const auto col = static_cast<Eigen::Index>(i);
            new_to_old[i] = (col >= start && col < start + width) ? -1 : static_cast<int>(src++);
        }
        const Eigen::VectorXd u = normal_vector(rng, width, config_.sigma_u);
        zeta_big_new = shift_by_fits(zeta, *small_fit, *big_fit, new_to_old, u);
        zeta_small = zeta;
        log_jump = -log_normal_density(u, config_.sigma_u);
    } else {
        std::vector<int> new_to_old(small_cols.begin(), small_cols.end());
        zeta_small = shift_by_fits(zeta, *big_fit, *small_fit, new_to_old, Eigen::VectorXd());
        const Eigen::VectorXd u = zeta.segment(start, width) - big_fit->segment(start, width);
        log_jump = log_normal_density(u, config_.sigma_u);
        zeta_big_new = Eigen::VectorXd::Zero(Z.cols());
        for (std::size_t i = 0; i < small_cols.size(); ++i) zeta_big_new[small_cols[i]] = zeta_small[i];
    }

    Eigen::VectorXd fitted = Z * zeta_big_new;
    const double ssr = (data_.y - fitted).squaredNorm();
    const double lp_big = log_normal_prior(birth ? zeta_big_new : zeta, prior_.sigma_B);
    const double lp_small = log_normal_prior(zeta_small, prior_.sigma_B);
    double log_alpha = log_lik(ssr) - log_lik(ssr_) + log_jump;
    if (birth) {
        log_alpha += lp_big - lp_small + std::log((1.0 - config_.c) / config_.c) +
                     term_birth_log_prior_ratio(prior_.lambda1, p, m) +
                     std::log(static_cast<double>(eligible.addable.size())) -
                     std::log(static_cast<double>(eligible_new.removable.size()));
    } else {
        log_alpha += lp_small - lp_big + std::log(config_.c / (1.0 - config_.c)) +
                     term_death_log_prior_ratio(prior_.lambda1, p, m) +
                     std::log(static_cast<double>(eligible.removable.size())) -
                     std::log(static_cast<double>(eligible_new.addable.size()));
    }
    if (accept(log_alpha, rng)) {
        state_.omega = omega_new;
        store_coefficients(state_.omega, birth ? zeta_big_new : zeta_small);
        fitted_ = std::move(fitted);
        ssr_ = ssr;
        ++counter.accepted;
    }
}

void Sampler::step_fixed_coef_update(Rng& rng) {
    const auto& terms = data_.candidates.terms();
    auto& counter = counters_[static_cast<std::size_t>(Move::FixedCoefficients)];
    ++counter.attempted;

    std::vector<int> binary_terms;
    for (std::size_t i = 0; i < terms.size(); ++i)
        if (state_.omega[i] && !terms[i].is_spline()) binary_terms.push_back(static_cast<int>(i));
    const auto dim = static_cast<Eigen::Index>(2 + binary_terms.size());
    Eigen::VectorXd current(dim);
    current[0] = state_.mu;
    current[1] = state_.phi;
    for (std::size_t r = 0; r < binary_terms.size(); ++r) {
        const auto& term = terms[binary_terms[r]];
        current[2 + static_cast<Eigen::Index>(r)] =
            term.kind == TermKind::BinaryMain ? state_.beta1[term.slot] : state_.beta2[term.slot];
    }
    const Eigen::VectorXd eps = normal_vector(rng, dim, config_.sigma_eps);
    Eigen::VectorXd fitted = fitted_.array() + eps[0];
    fitted += eps[1] * data_.t;
    for (std::size_t r = 0; r < binary_terms.size(); ++r)
        fitted += eps[2 + static_cast<Eigen::Index>(r)] * binary_cols_[binary_terms[r]];
    const double ssr = (data_.y - fitted).squaredNorm();
    const Eigen::VectorXd proposed = current + eps;
    const double log_alpha = log_lik(ssr) - log_lik(ssr_) + log_normal_prior(proposed, prior_.sigma_B) -
                             log_normal_prior(current, prior_.sigma_B);
    if (accept(log_alpha, rng)) {
        state_.mu = proposed[0];
        state_.phi = proposed[1];
        for (std::size_t r = 0; r < binary_terms.size(); ++r) {
            const auto& term = terms[binary_terms[r]];
            double& v = term.kind == TermKind::BinaryMain ? state_.beta1[term.slot] : state_.beta2[term.slot];
            v = proposed[2 + static_cast<Eigen::Index>(r)];
        }
        fitted_ = std::move(fitted);
        ssr_ = ssr;
        ++counter.accepted;
    }
}

void Sampler::step_sigma_gibbs(Rng& rng) {
    if (config_.fix_sigma_tau) return;
    const auto [shape, scale] = variance_conditional(data_.n(), ssr_, prior_);
    const double g = std::gamma_distribution<double>(shape, 1.0)(rng);
    state_.sigma_tau = std::sqrt(scale / g);
}

void Sampler::iterate(Rng& rng) {
    const auto& cands = data_.candidates;
    for (int slot = 0; slot < cands.spline_slots(); ++slot) {
        if (!state_.omega[cands.spline_term(slot)]) continue;
        if (config_.enable_knot_moves) {
            step_knot_move(slot, rng);
            step_knot_birth_death(slot, rng);
        }
        step_spline_coef_update(slot, rng);
    }
    if (config_.enable_term_moves) step_term_birth_death(rng);
    step_fixed_coef_update(rng);
    step_sigma_gibbs(rng);
    // Incremental updates of the fitted values drift; recompute periodically.
    if (++sweeps_ % 64 == 0) refresh_fit();
}

PosteriorDraws Sampler::run(Rng& rng, const std::function<void(const ModelState&)>& observer) {
    PosteriorDraws draws;
    draws.candidates = data_.candidates;
    draws.states.reserve(static_cast<std::size_t>(config_.n_samples));
    const long long total = config_.total_iterations();
    for (long long it = 1; it <= total; ++it) {
        iterate(rng);
        if (observer) observer(state_);
        if (it > config_.burn_in && (it - config_.burn_in) % config_.thin == 0) draws.states.push_back(state_);
    }
    draws.acceptance = counters_;
    return draws;
}

PosteriorDraws run_chain(const Dataset& data, const PriorConfig& prior, const SamplerConfig& config, Rng& rng) {
    data.validate();
    Sampler sampler(data, prior, config);
    return sampler.run(rng);
}

}  // namespace fkbma
