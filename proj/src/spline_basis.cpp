#include "fkbma/spline_basis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fkbma {

double Interval::clamp(double x) const noexcept { return std::clamp(x, lower, upper); }

namespace {

const std::vector<double>& empty_candidates() {
    static const std::vector<double> empty;
    return empty;
}

void check_knots(std::span<const double> knots, Interval boundary) {
    if (!(std::isfinite(boundary.lower) && std::isfinite(boundary.upper)) || !(boundary.lower < boundary.upper)) {
        throw std::invalid_argument("spline boundary must be a finite interval with lower < upper");
    }
    double prev = boundary.lower;
    for (double k : knots) {
        if (!std::isfinite(k)) throw std::invalid_argument("non-finite knot");
        if (!(k > prev) || !(k < boundary.upper)) {
            throw std::invalid_argument("knot " + std::to_string(k) + " outside boundary or not increasing");
        }
        prev = k;
    }
}

// Nonzero cubic basis functions at x (The NURBS Book, A2.1/A2.2 form of the
// Cox-de Boor recursion). Returns the index of the first of the four values.
int nonzero_basis(double x, std::span<const double> knots, Interval boundary, std::array<double, 4>& values) {
    const int k = static_cast<int>(knots.size());
    auto knot_at = [&](int i) -> double {
        if (i <= kSplineDegree) return boundary.lower;
        if (i >= k + kSplineDegree + 1) return boundary.upper;
        return knots[i - kSplineDegree - 1];
    };
    // Span index in the full knot vector: t[span] <= x < t[span + 1],
    // with x == upper assigned to the last non-empty span.
    int span;
    if (x >= boundary.upper) {
        span = k + kSplineDegree;
    } else {
        auto it = std::upper_bound(knots.begin(), knots.end(), x);
        span = kSplineDegree + static_cast<int>(it - knots.begin());
    }
    std::array<double, 4> left{}, right{};
    values[0] = 1.0;
    for (int j = 1; j <= kSplineDegree; ++j) {
        left[j] = x - knot_at(span + 1 - j);
        right[j] = knot_at(span + j) - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double temp = denom > 0.0 ? values[r] / denom : 0.0;
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    return span - kSplineDegree;
}

void check_x(double x, Interval boundary) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite covariate value");
    if (!boundary.contains(x)) {
        throw std::invalid_argument("covariate value " + std::to_string(x) + " outside spline boundary");
    }
}

}  // namespace

KnotState::KnotState(std::vector<double> candidates)
    : candidates_(std::make_shared<const std::vector<double>>(std::move(candidates))),
      active_(candidates_->size(), 0) {}

KnotState::KnotState(std::vector<double> candidates, std::vector<std::uint8_t> active)
    : candidates_(std::make_shared<const std::vector<double>>(std::move(candidates))), active_(std::move(active)) {
    if (active_.size() != candidates_->size()) {
        throw std::invalid_argument("knot indicator length differs from candidate count");
    }
    for (auto& a : active_) {
        a = a ? 1 : 0;
        count_ += a;
    }
}

const std::vector<double>& KnotState::candidates() const {
    return candidates_ ? *candidates_ : empty_candidates();
}

void KnotState::activate(int index) {
    if (!active_.at(index)) {
        active_[index] = 1;
        ++count_;
    }
}

void KnotState::deactivate(int index) {
    if (active_.at(index)) {
        active_[index] = 0;
        --count_;
    }
}

void KnotState::clear() {
    std::fill(active_.begin(), active_.end(), 0);
    count_ = 0;
}

std::vector<double> KnotState::active_positions() const {
    std::vector<double> out;
    out.reserve(count_);
    const auto& c = candidates();
    for (std::size_t i = 0; i < active_.size(); ++i)
        if (active_[i]) out.push_back(c[i]);
    return out;
}

std::vector<int> KnotState::active_indices() const {
    std::vector<int> out;
    out.reserve(count_);
    for (std::size_t i = 0; i < active_.size(); ++i)
        if (active_[i]) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> KnotState::vacant_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < active_.size(); ++i)
        if (!active_[i]) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> KnotState::vacant_within(double centre, double half_width) const {
    std::vector<int> out;
    const auto& c = candidates();
    for (std::size_t i = 0; i < active_.size(); ++i) {
        if (!active_[i] && std::abs(c[i] - centre) < half_width) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::uint64_t KnotState::mask() const noexcept {
    std::uint64_t m = 0;
    for (std::size_t i = 0; i < active_.size() && i < 64; ++i)
        if (active_[i]) m |= (std::uint64_t{1} << i);
    return m;
}

bool operator==(const KnotState& a, const KnotState& b) {
    return a.active_ == b.active_ && a.candidates() == b.candidates();
}

double sorted_quantile(std::span<const double> sorted, double prob) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> candidate_knots(std::span<const double> x_values, int count) {
    if (count < 1) throw std::invalid_argument("candidate knot count must be at least 1");
    std::vector<double> sorted(x_values.begin(), x_values.end());
    for (double v : sorted)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite covariate value");
    if (sorted.empty()) throw std::invalid_argument("degenerate covariate");
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();
    std::vector<double> knots;
    for (int q = 1; q <= count; ++q) {
        const double v = sorted_quantile(sorted, static_cast<double>(q) / (count + 1));
        if (v > lo && v < hi && (knots.empty() || v > knots.back())) knots.push_back(v);
    }
    if (knots.empty()) throw std::invalid_argument("degenerate covariate");
    return knots;
}

void basis_row(double x, std::span<const double> active_knots, Interval boundary,
               Eigen::Ref<Eigen::RowVectorXd> out) {
    check_x(x, boundary);
    const int d = static_cast<int>(active_knots.size()) + kSplineDegree;
    if (out.size() != d) throw std::invalid_argument("basis row has wrong length");
    out.setZero();
    std::array<double, 4> values{};
    const int first = nonzero_basis(x, active_knots, boundary, values);
    for (int r = 0; r <= kSplineDegree; ++r) {
        const int col = first + r - 1;  // leading basis function dropped
        if (col >= 0) out[col] = values[r];
    }
}

Eigen::RowVectorXd full_basis_row(double x, std::span<const double> active_knots, Interval boundary) {
    check_knots(active_knots, boundary);
    check_x(x, boundary);
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(active_knots.size()) + 4);
    std::array<double, 4> values{};
    const int first = nonzero_basis(x, active_knots, boundary, values);
    for (int r = 0; r <= kSplineDegree; ++r) out[first + r] = values[r];
    return out;
}

Eigen::MatrixXd build_basis(std::span<const double> x_values, std::span<const double> active_knots,
                            Interval boundary) {
    check_knots(active_knots, boundary);
    const auto n = static_cast<Eigen::Index>(x_values.size());
    const int d = static_cast<int>(active_knots.size()) + kSplineDegree;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, d);
    std::array<double, 4> values{};
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = x_values[i];
        check_x(x, boundary);
        const int first = nonzero_basis(x, active_knots, boundary, values);
        for (int r = 0; r <= kSplineDegree; ++r) {
            const int col = first + r - 1;
            if (col >= 0) out(i, col) = values[r];
        }
    }
    return out;
}

double median_spacing(std::span<const double> candidates) {
    if (candidates.size() < 2) return 0.0;
    std::vector<double> gaps;
    for (std::size_t i = 1; i < candidates.size(); ++i) gaps.push_back(candidates[i] - candidates[i - 1]);
    std::sort(gaps.begin(), gaps.end());
    return sorted_quantile(gaps, 0.5);
}

}  // namespace fkbma
