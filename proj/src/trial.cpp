#include "fkbma/trial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fkbma {

namespace {

constexpr long long kScreeningBudget = 1'000'000;
constexpr double kMinScreeningRate = 1e-4;
constexpr int kScreeningBatch = 256;

struct Fit {
    PosteriorDraws draws;
    Eigen::MatrixXd gamma;  // enrolled patients x retained draws
    std::vector<std::uint8_t> members;
    double max_abs_z = 0.0;
};

Fit fit(const Cohort& cohort, const CandidateSet& candidates, const TrialDesign& design, Rng& rng) {
    Fit f;
    const Dataset data = make_dataset(cohort, candidates);
    f.draws = run_chain(data, design.prior, design.sampler, rng);
    f.gamma = gamma_matrix(f.draws, data.x, data.z, false);
    f.members.resize(static_cast<std::size_t>(f.gamma.rows()));
    const double denom = static_cast<double>(f.gamma.cols());
    for (Eigen::Index i = 0; i < f.gamma.rows(); ++i)
        f.members[static_cast<std::size_t>(i)] =
            static_cast<double>((f.gamma.row(i).array() > design.e1).count()) / denom > 1.0 - design.alpha;
    f.max_abs_z = max_geweke(f.draws, f.gamma);
    return f;
}

std::vector<std::string> variable_names(const Scenario& scenario, const std::vector<Variable>& vars) {
    const auto cont = scenario.continuous_names();
    const auto bin = scenario.binary_names();
    std::vector<std::string> out;
    for (const auto& v : vars) out.push_back(v.continuous ? cont.at(v.column) : bin.at(v.column));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

void InterimSchedule::validate() const {
    if (analysis_sizes.empty()) throw std::invalid_argument("schedule must contain at least one analysis");
    int prev = 0;
    for (int n : analysis_sizes) {
        if (n <= prev) throw std::invalid_argument("schedule sizes must be positive and strictly increasing");
        prev = n;
    }
}

void TrialDesign::validate() const {
    thresholds.validate();
    prior.validate();
    sampler.validate();
    schedule.validate();
    if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("alpha must lie in (0,1)");
    if (!std::isfinite(e1)) throw std::invalid_argument("e1 must be finite");
    if (candidate_knots < 1 || candidate_knots > 64) throw std::invalid_argument("candidate_knots must lie in [1,64]");
    if (!(treatment_probability > 0 && treatment_probability < 1))
        throw std::invalid_argument("treatment_probability must lie in (0,1)");
    if (!(prune_cutoff >= 0 && prune_cutoff < 1)) throw std::invalid_argument("prune_cutoff must lie in [0,1)");
}

std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::EfficacyInSubgroup: return "efficacy_subgroup";
        case Verdict::EfficacyOverall: return "efficacy_overall";
        case Verdict::Futility: return "futility";
        case Verdict::NotSuperior: return "not_superior";
    }
    return "unknown";
}

void Cohort::append(const Cohort& other) {
    if (size() == 0) {
        *this = other;
        return;
    }
    const auto n = size();
    const auto m = other.size();
    x.conservativeResize(n + m, Eigen::NoChange);
    z.conservativeResize(n + m, Eigen::NoChange);
    t.conservativeResize(n + m);
    y.conservativeResize(n + m);
    x.bottomRows(m) = other.x;
    z.bottomRows(m) = other.z;
    t.tail(m) = other.t;
    y.tail(m) = other.y;
}

Cohort enroll(const Scenario& scenario, const Restriction* restriction, int count, Rng& rng,
              double treatment_probability) {
    if (count < 0) throw std::invalid_argument("enrollment count must be nonnegative");
    const auto px = static_cast<Eigen::Index>(scenario.continuous_count);
    const auto pz = static_cast<Eigen::Index>(scenario.binary_prevalences.size());
    Cohort c;
    c.x.resize(count, px);
    c.z.resize(count, pz);
    c.t.resize(count);
    c.y.resize(count);
    int filled = 0;
    auto admit = [&](const Profile& p) {
        for (Eigen::Index j = 0; j < px; ++j) c.x(filled, j) = p.x[static_cast<std::size_t>(j)];
        for (Eigen::Index j = 0; j < pz; ++j) c.z(filled, j) = p.z[static_cast<std::size_t>(j)];
        c.t[filled] = uniform01(rng) < treatment_probability ? 1.0 : 0.0;
        c.y[filled] = scenario.generate_outcome(p, c.t[filled], rng);
        ++filled;
    };
    if (restriction == nullptr) {
        while (filled < count) admit(scenario.generate_patient(rng));
        return c;
    }
    long long screened = 0;
    while (filled < count) {
        if (screened >= kScreeningBudget) throw std::runtime_error("enrichment region degenerate");
        std::vector<Profile> batch;
        Eigen::MatrixXd bx(kScreeningBatch, px);
        Eigen::MatrixXd bz(kScreeningBatch, pz);
        for (int i = 0; i < kScreeningBatch; ++i) {
            batch.push_back(scenario.generate_patient(rng));
            for (Eigen::Index j = 0; j < px; ++j) bx(i, j) = batch.back().x[static_cast<std::size_t>(j)];
            for (Eigen::Index j = 0; j < pz; ++j) bz(i, j) = batch.back().z[static_cast<std::size_t>(j)];
        }
        const auto members = membership(restriction->subspace, bx, bz, true);
        for (int i = 0; i < kScreeningBatch && filled < count; ++i) {
            ++screened;
            if (members[static_cast<std::size_t>(i)]) admit(batch[static_cast<std::size_t>(i)]);
        }
        if (screened >= kScreeningBudget / 10 &&
            static_cast<double>(filled) / static_cast<double>(screened) < kMinScreeningRate)
            throw std::runtime_error("enrichment region degenerate");
    }
    return c;
}

CandidateSet full_candidate_set(const Scenario& scenario, const Cohort& stage1, int knot_count) {
    std::vector<int> cont(static_cast<std::size_t>(scenario.continuous_count));
    std::vector<int> bin(scenario.binary_prevalences.size());
    std::vector<SplineDomain> domains;
    for (int j = 0; j < scenario.continuous_count; ++j) {
        cont[static_cast<std::size_t>(j)] = j;
        const Eigen::VectorXd col = stage1.x.col(j);
        std::vector<double> values(col.data(), col.data() + col.size());
        SplineDomain d;
        d.boundary = {col.minCoeff(), col.maxCoeff()};
        d.candidates = candidate_knots(values, knot_count);
        domains.push_back(std::move(d));
    }
    for (std::size_t j = 0; j < bin.size(); ++j) bin[j] = static_cast<int>(j);
    return CandidateSet(cont, bin, cont, bin, std::move(domains));
}

CandidateSet reduced_candidate_set(const CandidateSet& full, const std::vector<Variable>& predictive,
                                   const std::vector<Variable>& tailoring) {
    auto keep = [](const std::vector<int>& cols, const std::vector<Variable>& vars, bool continuous) {
        std::vector<int> out;
        for (int c : cols)
            if (std::find(vars.begin(), vars.end(), Variable{continuous, c}) != vars.end()) out.push_back(c);
        return out;
    };
    return CandidateSet(keep(full.predictive_continuous(), predictive, true),
                        keep(full.predictive_binary(), predictive, false),
                        keep(full.tailoring_continuous(), tailoring, true),
                        keep(full.tailoring_binary(), tailoring, false), full.domains());
}

Dataset make_dataset(const Cohort& cohort, const CandidateSet& candidates) {
    Dataset d;
    d.y = cohort.y;
    d.t = cohort.t;
    d.x = cohort.x;
    d.z = cohort.z;
    d.candidates = candidates;
    const auto& domains = candidates.domains();
    for (Eigen::Index j = 0; j < d.x.cols() && j < static_cast<Eigen::Index>(domains.size()); ++j)
        for (Eigen::Index i = 0; i < d.x.rows(); ++i) d.x(i, j) = domains[j].boundary.clamp(d.x(i, j));
    return d;
}

TrialResult run_trial(const Scenario& scenario, const TrialDesign& design, Rng& rng) {
    design.validate();
    const auto& sizes = design.schedule.analysis_sizes;
    TrialResult result;
    result.e1 = design.e1;
    result.alpha = design.alpha;

    Cohort cohort = enroll(scenario, nullptr, sizes.front(), rng, design.treatment_probability);
    const CandidateSet full = full_candidate_set(scenario, cohort, design.candidate_knots);

    // Draws backing the current enrollment restriction; kept alive across stages.
    PosteriorDraws restriction_draws;
    bool restricted = false;

    auto record_fit = [&](const Fit& f) {
        result.max_abs_geweke.push_back(f.max_abs_z);
        result.convergence_flags.push_back(f.max_abs_z < kGewekeLimit);
    };
    auto finish_efficacy_or_final = [&](Fit& decision_fit, bool efficacy) {
        const auto n = static_cast<std::ptrdiff_t>(cohort.size());
        const auto members = std::count(decision_fit.members.begin(), decision_fit.members.end(), std::uint8_t{1});
        if (efficacy) result.verdict = members >= n - 1 ? Verdict::EfficacyOverall : Verdict::EfficacyInSubgroup;
        else result.verdict = Verdict::NotSuperior;
        const auto predictive = retained_variables(decision_fit.draws, design.prune_cutoff);
        const auto tailoring = tailoring_variables(decision_fit.draws, design.prune_cutoff);
        Fit refit = fit(cohort, reduced_candidate_set(full, predictive, tailoring), design, rng);
        record_fit(refit);
        result.selected_variables =
            variable_names(scenario, tailoring_variables(refit.draws, design.prune_cutoff));
        result.final_draws = std::move(refit.draws);
    };

    for (std::size_t stage = 0; stage < sizes.size(); ++stage) {
        if (stage > 0) {
            Restriction r{SubspaceModel{&restriction_draws, design.e1, design.alpha}};
            const int extra = sizes[stage] - static_cast<int>(cohort.size());
            cohort.append(enroll(scenario, restricted ? &r : nullptr, extra, rng, design.treatment_probability));
        }
        result.stop_stage = static_cast<int>(stage) + 1;
        result.enrolled_n = static_cast<int>(cohort.size());

        Fit f = fit(cohort, full, design, rng);
        record_fit(f);
        const double prev = prevalence(f.members);
        result.stagewise_prevalence.push_back(prev);
        const bool final_stage = stage + 1 == sizes.size();

        if (!final_stage && prev < design.thresholds.pi) {
            result.verdict = Verdict::Futility;
            result.selected_variables = variable_names(scenario, tailoring_variables(f.draws, design.prune_cutoff));
            result.final_draws = std::move(f.draws);
            return result;
        }
        Decision d = Decision::Continue;
        if (prev > 0.0) d = decide(enriched_effect_draws(f.gamma, f.members), design.thresholds);
        if (final_stage) {
            finish_efficacy_or_final(f, d == Decision::Efficacy);
            return result;
        }
        if (d == Decision::Efficacy) {
            finish_efficacy_or_final(f, true);
            return result;
        }
        if (d == Decision::Futility) {
            result.verdict = Verdict::Futility;
            result.selected_variables = variable_names(scenario, tailoring_variables(f.draws, design.prune_cutoff));
            result.final_draws = std::move(f.draws);
            return result;
        }
        restriction_draws = std::move(f.draws);
        restricted = true;
    }
    throw std::logic_error("trial ended without a verdict");
}

Action recommend(const TrialResult& result, std::span<const double> x, std::span<const double> z) {
    const Eigen::MatrixXd xm = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::MatrixXd zm = Eigen::Map<const Eigen::RowVectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    return recommend(result, xm, zm).front();
}

std::vector<Action> recommend(const TrialResult& result, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (result.verdict == Verdict::EfficacyOverall) return std::vector<Action>(n, Action::Treat);
    if (result.verdict != Verdict::EfficacyInSubgroup) return std::vector<Action>(n, Action::Control);
    const SubspaceModel subspace{&result.final_draws, result.e1, result.alpha};
    const auto members = membership(subspace, x, z, true);
    std::vector<Action> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = members[i] ? Action::Treat : Action::Control;
    return out;
}

}  // namespace fkbma
