#include "fkbma/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace fkbma {

namespace {

constexpr Eigen::Index kProfileChunk = 512;

// Basis blocks of the tailoring spline terms, memoised per (slot, knot mask).
class BasisCache {
public:
    BasisCache(const CandidateSet& cands, const Eigen::MatrixXd& x, bool clamp)
        : cands_(cands), x_(x), clamp_(clamp), cache_(static_cast<std::size_t>(cands.spline_slots())) {}

    const Eigen::MatrixXd& get(int slot, const KnotState& knots) {
        auto& per_slot = cache_[static_cast<std::size_t>(slot)];
        const auto key = knots.mask();
        if (auto it = per_slot.find(key); it != per_slot.end()) return it->second;
        const int col = cands_.spline_column(slot);
        const auto& boundary = cands_.domains()[col].boundary;
        const auto positions = knots.active_positions();
        Eigen::MatrixXd block(x_.rows(), static_cast<Eigen::Index>(positions.size()) + kSplineDegree);
        for (Eigen::Index i = 0; i < x_.rows(); ++i) {
            double v = x_(i, col);
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite covariate");
            if (!boundary.contains(v)) {
                if (!clamp_) throw std::invalid_argument("continuous covariate outside its spline boundary");
                v = boundary.clamp(v);
            }
            Eigen::RowVectorXd row(block.cols());
            basis_row(v, positions, boundary, row);
            block.row(i) = row;
        }
        return per_slot.emplace(key, std::move(block)).first->second;
    }

private:
    const CandidateSet& cands_;
    const Eigen::MatrixXd& x_;
    bool clamp_;
    std::vector<std::unordered_map<std::uint64_t, Eigen::MatrixXd>> cache_;
};

void check_columns(const CandidateSet& cands, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) {
    if (x.rows() != z.rows()) throw std::invalid_argument("profile matrices differ in row count");
    for (int c : cands.tailoring_continuous())
        if (c >= x.cols()) throw std::invalid_argument("profile lacks a continuous tailoring column");
    for (int c : cands.tailoring_binary())
        if (c >= z.cols()) throw std::invalid_argument("profile lacks a binary tailoring column");
}

}  // namespace

void SubspaceModel::validate() const {
    if (draws == nullptr) throw std::invalid_argument("subspace without posterior draws");
    if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("alpha must lie in (0,1)");
}

void DecisionThresholds::validate() const {
    if (!(B1 > 0 && B1 < 1)) throw std::invalid_argument("B1 must lie in (0,1)");
    if (!(B2 > 0 && B2 < 1)) throw std::invalid_argument("B2 must lie in (0,1)");
    if (!(pi >= 0 && pi < 1)) throw std::invalid_argument("pi must lie in [0,1)");
    if (!std::isfinite(b1) || !std::isfinite(b2)) throw std::invalid_argument("effect thresholds must be finite");
}

std::string_view decision_name(Decision d) {
    switch (d) {
        case Decision::Efficacy: return "efficacy";
        case Decision::Futility: return "futility";
        case Decision::Continue: return "continue";
    }
    return "unknown";
}

Eigen::MatrixXd gamma_matrix(const PosteriorDraws& draws, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                             bool clamp) {
    const auto& cands = draws.candidates;
    check_columns(cands, x, z);
    const auto& terms = cands.terms();
    BasisCache cache(cands, x, clamp);
    Eigen::MatrixXd g(x.rows(), static_cast<Eigen::Index>(draws.states.size()));
    for (std::size_t d = 0; d < draws.states.size(); ++d) {
        const auto& s = draws.states[d];
        auto col = g.col(static_cast<Eigen::Index>(d));
        col.setConstant(s.phi);
        for (std::size_t i = 0; i < terms.size(); ++i) {
            if (!s.omega[i]) continue;
            const auto& term = terms[i];
            if (term.kind == TermKind::SplineTailoring)
                col.noalias() += cache.get(term.slot, s.knots[term.slot]) * s.theta[term.slot];
            else if (term.kind == TermKind::BinaryTailoring)
                col += s.beta2[term.slot] * z.col(term.column);
        }
    }
    return g;
}

std::vector<double> exceedance_probability(const PosteriorDraws& draws, const Eigen::MatrixXd& x,
                                           const Eigen::MatrixXd& z, double e1, bool clamp) {
    if (draws.states.empty()) throw std::invalid_argument("no retained posterior draws");
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    const double denom = static_cast<double>(draws.states.size());
    for (Eigen::Index start = 0; start < x.rows(); start += kProfileChunk) {
        const Eigen::Index len = std::min(kProfileChunk, x.rows() - start);
        const Eigen::MatrixXd xs = x.middleRows(start, len);
        const Eigen::MatrixXd zs = z.middleRows(start, len);
        const Eigen::MatrixXd g = gamma_matrix(draws, xs, zs, clamp);
        for (Eigen::Index i = 0; i < len; ++i)
            out[static_cast<std::size_t>(start + i)] = static_cast<double>((g.row(i).array() > e1).count()) / denom;
    }
    return out;
}

bool membership(const SubspaceModel& subspace, std::span<const double> x, std::span<const double> z, bool clamp) {
    const Eigen::MatrixXd xm =
        Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::MatrixXd zm =
        Eigen::Map<const Eigen::RowVectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    return membership(subspace, xm, zm, clamp).front() != 0;
}

std::vector<std::uint8_t> membership(const SubspaceModel& subspace, const Eigen::MatrixXd& x,
                                     const Eigen::MatrixXd& z, bool clamp) {
    subspace.validate();
    const auto prob = exceedance_probability(*subspace.draws, x, z, subspace.e1, clamp);
    std::vector<std::uint8_t> out(prob.size());
    for (std::size_t i = 0; i < prob.size(); ++i) out[i] = prob[i] > 1.0 - subspace.alpha ? 1 : 0;
    return out;
}

double prevalence(std::span<const std::uint8_t> members) {
    if (members.empty()) return 0.0;
    return static_cast<double>(std::count(members.begin(), members.end(), std::uint8_t{1})) /
           static_cast<double>(members.size());
}

double prevalence(const SubspaceModel& subspace, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, bool clamp) {
    return prevalence(membership(subspace, x, z, clamp));
}

std::vector<double> enriched_effect_draws(const Eigen::MatrixXd& gamma, std::span<const std::uint8_t> members) {
    if (static_cast<Eigen::Index>(members.size()) != gamma.rows())
        throw std::invalid_argument("membership length differs from profile count");
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < members.size(); ++i)
        if (members[i]) rows.push_back(static_cast<Eigen::Index>(i));
    if (rows.empty()) throw std::invalid_argument("empty effective subspace");
    std::vector<double> delta(static_cast<std::size_t>(gamma.cols()), 0.0);
    for (Eigen::Index d = 0; d < gamma.cols(); ++d) {
        double sum = 0.0;
        for (auto r : rows) sum += gamma(r, d);
        delta[static_cast<std::size_t>(d)] = sum / static_cast<double>(rows.size());
    }
    return delta;
}

std::vector<double> enriched_effect_draws(const SubspaceModel& subspace, const Eigen::MatrixXd& x,
                                          const Eigen::MatrixXd& z, bool clamp) {
    subspace.validate();
    const Eigen::MatrixXd g = gamma_matrix(*subspace.draws, x, z, clamp);
    std::vector<std::uint8_t> members(static_cast<std::size_t>(g.rows()));
    const double denom = static_cast<double>(g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        members[static_cast<std::size_t>(i)] =
            static_cast<double>((g.row(i).array() > subspace.e1).count()) / denom > 1.0 - subspace.alpha;
    return enriched_effect_draws(g, members);
}

Decision decide(std::span<const double> delta_draws, const DecisionThresholds& thresholds) {
    if (delta_draws.empty()) throw std::invalid_argument("no effect draws");
    const double n = static_cast<double>(delta_draws.size());
    const auto above = std::count_if(delta_draws.begin(), delta_draws.end(), [&](double d) { return d > thresholds.b1; });
    if (static_cast<double>(above) / n > thresholds.B1) return Decision::Efficacy;
    const auto below = std::count_if(delta_draws.begin(), delta_draws.end(), [&](double d) { return d < thresholds.b2; });
    if (static_cast<double>(below) / n > thresholds.B2) return Decision::Futility;
    return Decision::Continue;
}

std::vector<double> inclusion_probabilities(const PosteriorDraws& draws) {
    const int p = draws.candidates.p();
    std::vector<double> out(static_cast<std::size_t>(p), 0.0);
    if (draws.states.empty()) return out;
    for (const auto& s : draws.states)
        for (int i = 0; i < p; ++i) out[static_cast<std::size_t>(i)] += s.omega[static_cast<std::size_t>(i)];
    for (auto& v : out) v /= static_cast<double>(draws.states.size());
    return out;
}

std::vector<Variable> retained_variables(const PosteriorDraws& draws, double cutoff) {
    const auto incl = inclusion_probabilities(draws);
    const auto& terms = draws.candidates.terms();
    std::vector<Variable> out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].is_tailoring()) continue;
        double best = incl[i];
        if (terms[i].partner >= 0) best = std::max(best, incl[static_cast<std::size_t>(terms[i].partner)]);
        if (best >= cutoff) out.push_back({terms[i].is_spline(), terms[i].column});
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Variable> tailoring_variables(const PosteriorDraws& draws, double cutoff) {
    const auto incl = inclusion_probabilities(draws);
    const auto& terms = draws.candidates.terms();
    std::vector<Variable> out;
    for (std::size_t i = 0; i < terms.size(); ++i)
        if (terms[i].is_tailoring() && incl[i] >= cutoff) out.push_back({terms[i].is_spline(), terms[i].column});
    std::sort(out.begin(), out.end());
    return out;
}

double geweke(std::span<const double> trace) {
    const std::size_t seg = trace.size() / 4;
    if (seg < 2) throw std::invalid_argument("trace too short for the Geweke diagnostic");
    auto stats = [](std::span<const double> s) {
        double mean = 0.0;
        for (double v : s) mean += v;
        mean /= static_cast<double>(s.size());
        const std::size_t batches = std::min<std::size_t>(20, s.size());
        const std::size_t size = s.size() / batches;
        std::vector<double> bm(batches, 0.0);
        for (std::size_t b = 0; b < batches; ++b) {
            for (std::size_t i = 0; i < size; ++i) bm[b] += s[b * size + i];
            bm[b] /= static_cast<double>(size);
        }
        double bmean = 0.0;
        for (double v : bm) bmean += v;
        bmean /= static_cast<double>(batches);
        double var = 0.0;
        for (double v : bm) var += (v - bmean) * (v - bmean);
        var /= static_cast<double>(batches - 1);
        const double se = std::max(std::sqrt(var / static_cast<double>(batches)), 1e-12);
        return std::pair{mean, se};
    };
    const auto [m1, s1] = stats(trace.first(seg));
    const auto [m2, s2] = stats(trace.last(seg));
    return (m1 - m2) / std::sqrt(s1 * s1 + s2 * s2);
}

double max_geweke(const PosteriorDraws& draws, const Eigen::MatrixXd& gamma) {
    std::vector<double> trace(draws.states.size());
    for (std::size_t d = 0; d < trace.size(); ++d) trace[d] = draws.states[d].phi;
    double worst = std::abs(geweke(trace));
    for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
        for (std::size_t d = 0; d < trace.size(); ++d) trace[d] = gamma(i, static_cast<Eigen::Index>(d));
        worst = std::max(worst, std::abs(geweke(trace)));
    }
    return worst;
}

}  // namespace fkbma
