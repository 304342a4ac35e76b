#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace fkbma {

inline constexpr int kSplineDegree = 3;

struct Interval {
    double lower = 0.0;
    double upper = 1.0;

    [[nodiscard]] bool contains(double x) const noexcept { return x >= lower && x <= upper; }
    [[nodiscard]] double clamp(double x) const noexcept;
};

/// Active subset of a fixed, ordered grid of candidate knots for one spline term.
///
/// The candidate grid is shared between copies, so copying a KnotState only
/// copies the indicator vector.
class KnotState {
public:
    KnotState() = default;
    explicit KnotState(std::vector<double> candidates);
    KnotState(std::vector<double> candidates, std::vector<std::uint8_t> active);

    [[nodiscard]] const std::vector<double>& candidates() const;
    [[nodiscard]] const std::vector<std::uint8_t>& active() const noexcept { return active_; }
    [[nodiscard]] int candidate_count() const noexcept { return static_cast<int>(active_.size()); }
    [[nodiscard]] int count() const noexcept { return count_; }
    [[nodiscard]] bool is_active(int index) const { return active_.at(index) != 0; }

    void activate(int index);
    void deactivate(int index);
    void clear();

    [[nodiscard]] std::vector<double> active_positions() const;
    [[nodiscard]] std::vector<int> active_indices() const;
    [[nodiscard]] std::vector<int> vacant_indices() const;

    /// Vacant candidates strictly inside (centre - half_width, centre + half_width).
    [[nodiscard]] std::vector<int> vacant_within(double centre, double half_width) const;

    /// Bit pattern of the active set; only meaningful for at most 64 candidates.
    [[nodiscard]] std::uint64_t mask() const noexcept;

    friend bool operator==(const KnotState& a, const KnotState& b);

private:
    std::shared_ptr<const std::vector<double>> candidates_;
    std::vector<std::uint8_t> active_;
    int count_ = 0;
};

/// Type-7 sample quantile of already sorted data.
double sorted_quantile(std::span<const double> sorted, double prob);

/// Interior (q / (count + 1)) quantiles, q = 1..count, deduplicated and kept
/// strictly inside (min, max) of the data.
std::vector<double> candidate_knots(std::span<const double> x_values, int count);

/// Cubic B-spline basis with boundary knots at the interval ends and the
/// leading basis function dropped: the result has knots.size() + 3 columns.
Eigen::MatrixXd build_basis(std::span<const double> x_values, std::span<const double> active_knots,
                            Interval boundary);

/// Single row of build_basis, written into `out` (size knots.size() + 3).
void basis_row(double x, std::span<const double> active_knots, Interval boundary,
               Eigen::Ref<Eigen::RowVectorXd> out);

/// All knots.size() + 4 basis functions at x, including the one build_basis drops.
Eigen::RowVectorXd full_basis_row(double x, std::span<const double> active_knots, Interval boundary);

/// Median spacing of consecutive candidate knots (0 when fewer than two).
double median_spacing(std::span<const double> candidates);

}  // namespace fkbma
