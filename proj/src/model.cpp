#include "fkbma/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace fkbma {

namespace {

void require_unique(const std::vector<int>& cols, const char* what) {
    std::set<int> seen;
    for (int c : cols) {
        if (c < 0) throw std::invalid_argument(std::string(what) + ": negative column index");
        if (!seen.insert(c).second) throw std::invalid_argument(std::string(what) + ": duplicate column index");
    }
}

int find_main_term(const std::vector<Term>& terms, TermKind kind, int column) {
    for (std::size_t i = 0; i < terms.size(); ++i)
        if (terms[i].kind == kind && terms[i].column == column) return static_cast<int>(i);
    return -1;
}

}  // namespace

CandidateSet::CandidateSet(std::vector<int> predictive_continuous, std::vector<int> predictive_binary,
                           std::vector<int> tailoring_continuous, std::vector<int> tailoring_binary,
                           std::vector<SplineDomain> domains)
    : pred_cont_(std::move(predictive_continuous)),
      pred_bin_(std::move(predictive_binary)),
      tail_cont_(std::move(tailoring_continuous)),
      tail_bin_(std::move(tailoring_binary)),
      domains_(std::move(domains)) {
    require_unique(pred_cont_, "predictive continuous");
    require_unique(pred_bin_, "predictive binary");
    require_unique(tail_cont_, "tailoring continuous");
    require_unique(tail_bin_, "tailoring binary");
    for (int c : pred_cont_) {
        if (c >= static_cast<int>(domains_.size())) throw std::invalid_argument("continuous column without a domain");
        const auto& d = domains_[c];
        if (!(d.boundary.lower < d.boundary.upper)) throw std::invalid_argument("empty spline boundary");
        double prev = d.boundary.lower;
        for (double k : d.candidates) {
            if (!(k > prev) || !(k < d.boundary.upper))
                throw std::invalid_argument("candidate knots must be increasing and inside the boundary");
            prev = k;
        }
        if (d.candidates.size() > 64) throw std::invalid_argument("at most 64 candidate knots are supported");
    }

    for (std::size_t i = 0; i < pred_cont_.size(); ++i) {
        terms_.push_back({TermKind::SplineMain, pred_cont_[i], static_cast<int>(i)});
        spline_terms_.push_back(static_cast<int>(terms_.size()) - 1);
    }
    for (std::size_t i = 0; i < pred_bin_.size(); ++i)
        terms_.push_back({TermKind::BinaryMain, pred_bin_[i], static_cast<int>(i)});
    for (std::size_t i = 0; i < tail_cont_.size(); ++i) {
        const int main = find_main_term(terms_, TermKind::SplineMain, tail_cont_[i]);
        if (main < 0) throw std::invalid_argument("tailoring continuous variable is not a predictive candidate");
        terms_.push_back({TermKind::SplineTailoring, tail_cont_[i], static_cast<int>(pred_cont_.size() + i), main});
        terms_[main].partner = static_cast<int>(terms_.size()) - 1;
        spline_terms_.push_back(static_cast<int>(terms_.size()) - 1);
    }
    for (std::size_t i = 0; i < tail_bin_.size(); ++i) {
        const int main = find_main_term(terms_, TermKind::BinaryMain, tail_bin_[i]);
        if (main < 0) throw std::invalid_argument("tailoring binary variable is not a predictive candidate");
        terms_.push_back({TermKind::BinaryTailoring, tail_bin_[i], static_cast<int>(i), main});
        terms_[main].partner = static_cast<int>(terms_.size()) - 1;
    }
}

void Dataset::validate() const {
    const auto n = y.size();
    if (n < 1) throw std::invalid_argument("dataset must contain at least one observation");
    if (t.size() != n || x.rows() != n || z.rows() != n) throw std::invalid_argument("dataset dimension mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(y[i])) throw std::invalid_argument("non-finite outcome");
        if (t[i] != 0.0 && t[i] != 1.0) throw std::invalid_argument("treatment indicators must be 0 or 1");
    }
    for (int c : candidates.predictive_binary())
        if (c >= z.cols()) throw std::invalid_argument("binary candidate column out of range");
    for (int c : candidates.predictive_continuous())
        if (c >= x.cols()) throw std::invalid_argument("continuous candidate column out of range");
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double v = z.data()[i];
        if (v != 0.0 && v != 1.0) throw std::invalid_argument("binary biomarkers must be 0 or 1");
    }
    for (int c : candidates.predictive_continuous()) {
        const auto& b = candidates.domains()[c].boundary;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isfinite(x(i, c)) || !b.contains(x(i, c)))
                throw std::invalid_argument("continuous biomarker outside its spline boundary");
        }
    }
}

int ModelState::active_terms() const {
    return static_cast<int>(std::count(omega.begin(), omega.end(), std::uint8_t{1}));
}

void PriorConfig::validate() const {
    if (!(lambda1 > 0) || !(lambda2 > 0) || !(sigma_B > 0) || !(a0 > 0) || !(b0 > 0))
        throw std::invalid_argument("prior hyperparameters must be strictly positive");
}

ModelState empty_state(const CandidateSet& candidates) {
    ModelState s;
    s.omega.assign(candidates.p(), 0);
    s.beta1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(candidates.predictive_binary().size()));
    s.beta2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(candidates.tailoring_binary().size()));
    for (int slot = 0; slot < candidates.spline_slots(); ++slot) {
        s.knots.emplace_back(candidates.spline_domain(slot).candidates);
        s.theta.push_back(Eigen::VectorXd::Zero(kSplineDegree));
    }
    return s;
}

bool hierarchy_holds(const CandidateSet& candidates, std::span<const std::uint8_t> omega) {
    const auto& terms = candidates.terms();
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].is_tailoring() && omega[i] && !omega[terms[i].partner]) return false;
    }
    return true;
}

std::string state_violation(const CandidateSet& candidates, const ModelState& state) {
    const auto& terms = candidates.terms();
    if (state.omega.size() != terms.size()) return "omega length differs from term count";
    if (state.knots.size() != static_cast<std::size_t>(candidates.spline_slots()) ||
        state.theta.size() != state.knots.size())
        return "spline slot count mismatch";
    if (state.beta1.size() != static_cast<Eigen::Index>(candidates.predictive_binary().size()) ||
        state.beta2.size() != static_cast<Eigen::Index>(candidates.tailoring_binary().size()))
        return "binary coefficient count mismatch";
    if (!hierarchy_holds(candidates, state.omega)) return "hierarchy violated";
    if (!(state.sigma_tau > 0) || !std::isfinite(state.sigma_tau)) return "sigma_tau must be positive";
    if (!std::isfinite(state.mu) || !std::isfinite(state.phi)) return "non-finite fixed coefficient";
    for (int slot = 0; slot < candidates.spline_slots(); ++slot) {
        const auto& k = state.knots[slot];
        if (k.candidates() != candidates.spline_domain(slot).candidates) return "knot grid differs from domain";
        if (state.theta[slot].size() != k.count() + kSplineDegree) return "spline coefficient count != k_s + 3";
        if (!state.theta[slot].allFinite()) return "non-finite spline coefficient";
        if (!state.omega[candidates.spline_term(slot)] && !state.theta[slot].isZero(0.0))
            return "inactive spline term carries nonzero coefficients";
    }
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const auto& term = terms[i];
        if (term.kind == TermKind::BinaryMain || term.kind == TermKind::BinaryTailoring) {
            const double v = term.kind == TermKind::BinaryMain ? state.beta1[term.slot] : state.beta2[term.slot];
            if (!std::isfinite(v)) return "non-finite binary coefficient";
            if (!state.omega[i] && v != 0.0) return "inactive binary term carries a nonzero coefficient";
        }
    }
    return {};
}

std::vector<int> term_widths(const CandidateSet& candidates, std::span<const KnotState> knots) {
    std::vector<int> w;
    w.reserve(candidates.p());
    for (const auto& term : candidates.terms())
        w.push_back(term.is_spline() ? knots[term.slot].count() + kSplineDegree : 1);
    return w;
}

std::vector<int> term_offsets(const CandidateSet& candidates, std::span<const KnotState> knots) {
    const auto w = term_widths(candidates, knots);
    std::vector<int> off(w.size() + 1);
    off[0] = 2;
    for (std::size_t i = 0; i < w.size(); ++i) off[i + 1] = off[i] + w[i];
    return off;
}

Eigen::MatrixXd spline_block(const Dataset& data, int slot, const KnotState& knots) {
    const auto& cands = data.candidates;
    const int col = cands.spline_column(slot);
    const Eigen::VectorXd xs = data.x.col(col);
    const auto positions = knots.active_positions();
    Eigen::MatrixXd block = build_basis(std::span<const double>(xs.data(), static_cast<std::size_t>(xs.size())),
                                        positions, cands.domains()[col].boundary);
    if (cands.terms()[cands.spline_term(slot)].is_tailoring()) block = data.t.asDiagonal() * block;
    return block;
}

Eigen::MatrixXd assemble_saturated_design(const Dataset& data, std::span<const KnotState> knots) {
    const auto& cands = data.candidates;
    if (knots.size() != static_cast<std::size_t>(cands.spline_slots()))
        throw std::invalid_argument("one knot state per spline term required");
    if (data.t.size() != data.n() || data.x.rows() != data.n() || data.z.rows() != data.n())
        throw std::invalid_argument("dataset dimension mismatch");
    const auto off = term_offsets(cands, knots);
    Eigen::MatrixXd Z(data.n(), off.back());
    Z.col(0).setOnes();
    Z.col(1) = data.t;
    const auto& terms = cands.terms();
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const auto& term = terms[i];
        switch (term.kind) {
            case TermKind::SplineMain:
            case TermKind::SplineTailoring:
                Z.middleCols(off[i], off[i + 1] - off[i]) = spline_block(data, term.slot, knots[term.slot]);
                break;
            case TermKind::BinaryMain:
                Z.col(off[i]) = data.z.col(term.column);
                break;
            case TermKind::BinaryTailoring:
                Z.col(off[i]) = data.z.col(term.column).cwiseProduct(data.t);
                break;
        }
    }
    return Z;
}

std::vector<std::uint8_t> augment_inclusion(const CandidateSet& candidates, std::span<const std::uint8_t> omega,
                                            std::span<const int> widths) {
    if (omega.size() != static_cast<std::size_t>(candidates.p()) || widths.size() != omega.size())
        throw std::invalid_argument("inclusion vector length must equal the number of terms");
    std::vector<std::uint8_t> coef{1, 1};
    for (std::size_t i = 0; i < omega.size(); ++i) coef.insert(coef.end(), widths[i], omega[i] ? 1 : 0);
    return coef;
}

Eigen::MatrixXd active_design(const Eigen::MatrixXd& saturated, std::span<const std::uint8_t> omega_coef) {
    if (saturated.cols() != static_cast<Eigen::Index>(omega_coef.size()))
        throw std::invalid_argument("column indicator length differs from design width");
    Eigen::MatrixXd out = saturated;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        if (!omega_coef[j]) out.col(j).setZero();
    return out;
}

Eigen::VectorXd pack_coefficients(const CandidateSet& candidates, const ModelState& state) {
    const auto off = term_offsets(candidates, state.knots);
    Eigen::VectorXd zeta(off.back());
    zeta[0] = state.mu;
    zeta[1] = state.phi;
    const auto& terms = candidates.terms();
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const auto& term = terms[i];
        switch (term.kind) {
            case TermKind::SplineMain:
            case TermKind::SplineTailoring: zeta.segment(off[i], off[i + 1] - off[i]) = state.theta[term.slot]; break;
            case TermKind::BinaryMain: zeta[off[i]] = state.beta1[term.slot]; break;
            case TermKind::BinaryTailoring: zeta[off[i]] = state.beta2[term.slot]; break;
        }
    }
    return zeta;
}

void unpack_coefficients(const CandidateSet& candidates, const Eigen::VectorXd& zeta, ModelState& state) {
    const auto off = term_offsets(candidates, state.knots);
    if (zeta.size() != off.back()) throw std::invalid_argument("coefficient vector length mismatch");
    state.mu = zeta[0];
    state.phi = zeta[1];
    const auto& terms = candidates.terms();
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const auto& term = terms[i];
        switch (term.kind) {
            case TermKind::SplineMain:
            case TermKind::SplineTailoring: state.theta[term.slot] = zeta.segment(off[i], off[i + 1] - off[i]); break;
            case TermKind::BinaryMain: state.beta1[term.slot] = zeta[off[i]]; break;
            case TermKind::BinaryTailoring: state.beta2[term.slot] = zeta[off[i]]; break;
        }
    }
}

Eigen::VectorXd fitted_values(const Dataset& data, const ModelState& state) {
    const auto& cands = data.candidates;
    Eigen::VectorXd f = Eigen::VectorXd::Constant(data.n(), state.mu) + state.phi * data.t;
    const auto& terms = cands.terms();
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!state.omega[i]) continue;
        const auto& term = terms[i];
        switch (term.kind) {
            case TermKind::SplineMain:
            case TermKind::SplineTailoring:
                f += spline_block(data, term.slot, state.knots[term.slot]) * state.theta[term.slot];
                break;
            case TermKind::BinaryMain: f += state.beta1[term.slot] * data.z.col(term.column); break;
            case TermKind::BinaryTailoring:
                f += state.beta2[term.slot] * data.z.col(term.column).cwiseProduct(data.t);
                break;
        }
    }
    return f;
}

double gaussian_log_likelihood(double ssr, Eigen::Index n, double sigma) {
    const double nn = static_cast<double>(n);
    return -0.5 * nn * std::log(2.0 * std::numbers::pi * sigma * sigma) - ssr / (2.0 * sigma * sigma);
}

double log_likelihood(const Dataset& data, const ModelState& state) {
    const double ssr = (data.y - fitted_values(data, state)).squaredNorm();
    const double ll = gaussian_log_likelihood(ssr, data.n(), state.sigma_tau);
    if (!std::isfinite(ll)) throw std::overflow_error("numerical overflow");
    return ll;
}

double log_normal_prior(const Eigen::Ref<const Eigen::VectorXd>& coefficients, double sigma_B) {
    const double k = static_cast<double>(coefficients.size());
    return -0.5 * k * std::log(2.0 * std::numbers::pi * sigma_B * sigma_B) -
           coefficients.squaredNorm() / (2.0 * sigma_B * sigma_B);
}

double log_choose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double log_prior(const CandidateSet& candidates, const ModelState& state, const PriorConfig& prior) {
    const int p = candidates.p();
    const int m = state.active_terms();
    double lp = m * std::log(prior.lambda1) - std::lgamma(m + 1.0) - log_choose(p, m);
    for (const auto& k : state.knots) {
        lp += k.count() * std::log(prior.lambda2) - std::lgamma(k.count() + 1.0) -
              log_choose(k.candidate_count(), k.count());
    }
    Eigen::Vector2d fixed(state.mu, state.phi);
    lp += log_normal_prior(fixed, prior.sigma_B);
    const auto& terms = candidates.terms();
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!state.omega[i]) continue;
        const auto& term = terms[i];
        switch (term.kind) {
            case TermKind::SplineMain:
            case TermKind::SplineTailoring: lp += log_normal_prior(state.theta[term.slot], prior.sigma_B); break;
            case TermKind::BinaryMain: lp += log_normal_prior(state.beta1.segment(term.slot, 1), prior.sigma_B); break;
            case TermKind::BinaryTailoring:
                lp += log_normal_prior(state.beta2.segment(term.slot, 1), prior.sigma_B);
                break;
        }
    }
    // Inverse-Gamma(a0, b0) on the residual variance.
    const double v = state.sigma_tau * state.sigma_tau;
    lp += prior.a0 * std::log(prior.b0) - std::lgamma(prior.a0) - (prior.a0 + 1.0) * std::log(v) - prior.b0 / v;
    return lp;
}

double gamma_at(const CandidateSet& candidates, std::span<const double> xt, std::span<const double> zt,
                const ModelState& state) {
    if (xt.size() != candidates.tailoring_continuous().size() || zt.size() != candidates.tailoring_binary().size())
        throw std::invalid_argument("tailoring covariate length mismatch");
    double g = state.phi;
    const auto& terms = candidates.terms();
    const int J = static_cast<int>(candidates.predictive_continuous().size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const auto& term = terms[i];
        if (!state.omega[i]) continue;
        if (term.kind == TermKind::SplineTailoring) {
            const auto& domain = candidates.domains()[term.column];
            const auto positions = state.knots[term.slot].active_positions();
            Eigen::RowVectorXd row(static_cast<Eigen::Index>(positions.size()) + kSplineDegree);
            basis_row(xt[term.slot - J], positions, domain.boundary, row);
            g += row.dot(state.theta[term.slot]);
        } else if (term.kind == TermKind::BinaryTailoring) {
            g += state.beta2[term.slot] * zt[term.slot];
        }
    }
    return g;
}

}  // namespace fkbma
