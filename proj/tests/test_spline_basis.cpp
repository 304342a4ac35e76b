#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fkbma/rng.hpp"
#include "fkbma/spline_basis.hpp"
#include "oracles.hpp"

using namespace fkbma;

namespace {

// Type-7 quantile written out independently of the library.
double type7(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = (v.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - lo) * (v[lo + 1] - v[lo]);
}

std::vector<double> random_knots(Rng& rng, int k, double lo, double hi) {
    std::vector<double> kn;
    while (static_cast<int>(kn.size()) < k) {
        const double v = lo + (hi - lo) * uniform01(rng);
        if (v > lo && v < hi && std::find(kn.begin(), kn.end(), v) == kn.end()) kn.push_back(v);
    }
    std::sort(kn.begin(), kn.end());
    return kn;
}

}  // namespace

TEST_SUITE("spline_basis") {
    TEST_CASE("candidate knots of a uniform grid are the interior deciles") {
        std::vector<double> x;
        for (int i = 0; i <= 10; ++i) x.push_back(i / 10.0);
        const auto k = candidate_knots(x, 9);
        REQUIRE(k.size() == 9);
        for (int q = 1; q <= 9; ++q) CHECK(k[q - 1] == doctest::Approx(q / 10.0).epsilon(1e-12));
    }

    TEST_CASE("single candidate knot is the median") {
        const std::vector<double> x{1, 2, 3, 4};
        const auto k = candidate_knots(x, 1);
        REQUIRE(k.size() == 1);
        CHECK(k[0] == doctest::Approx(2.5));
    }

    TEST_CASE("candidate knots of uniform data track the sort-based quantile oracle") {
        Rng rng = make_stream(11, 0);
        std::vector<double> x(500);
        for (auto& v : x) v = uniform01(rng);
        const auto k = candidate_knots(x, 9);
        REQUIRE(k.size() == 9);
        for (int q = 1; q <= 9; ++q) {
            CHECK(std::abs(k[q - 1] - q / 10.0) < 0.05);
            CHECK(k[q - 1] == doctest::Approx(type7(x, q / 10.0)).epsilon(1e-14));
        }
    }

    TEST_CASE("candidate knots are deduplicated and strictly interior") {
        const std::vector<double> x{0, 0, 0, 0, 0, 0, 1, 2, 2, 2, 2};
        const auto k = candidate_knots(x, 9);
        CHECK(std::is_sorted(k.begin(), k.end()));
        CHECK(std::adjacent_find(k.begin(), k.end()) == k.end());
        for (double v : k) CHECK((v > 0.0 && v < 2.0));
    }

    TEST_CASE("degenerate covariates are rejected") {
        const std::vector<double> same(20, 3.0);
        CHECK_THROWS_WITH(candidate_knots(same, 9), "degenerate covariate");
        CHECK_THROWS(candidate_knots(std::vector<double>{1, 2}, 0));
        CHECK_THROWS(candidate_knots(std::vector<double>{1, NAN, 2}, 3));
    }

    TEST_CASE("zero knots give three columns") {
        const std::vector<double> x{0.0, 0.25, 0.5, 1.0};
        const auto B = build_basis(x, {}, Interval{0, 1});
        CHECK(B.rows() == 4);
        CHECK(B.cols() == 3);
    }

    TEST_CASE("two knots at 0.3 and 0.7 match the recursive oracle at 0.5") {
        const std::vector<double> knots{0.3, 0.7};
        const std::vector<double> x{0.5};
        const auto B = build_basis(x, knots, Interval{0, 1});
        REQUIRE(B.cols() == 5);
        const auto full = oracle::full_basis(knots, 0, 1, 0.5);
        for (int j = 0; j < 5; ++j) CHECK(B(0, j) == doctest::Approx(full[j + 1]).epsilon(1e-12));
    }

    TEST_CASE("full basis is a partition of unity and the returned columns drop the first function") {
        Rng rng = make_stream(3, 0);
        for (int rep = 0; rep < 50; ++rep) {
            const int k = uniform_index(rng, 8);
            const auto knots = random_knots(rng, k, -1.0, 2.0);
            for (double x : {-1.0, 2.0, -1.0 + 3.0 * uniform01(rng)}) {
                const auto full = full_basis_row(x, knots, Interval{-1, 2});
                CHECK(std::abs(full.sum() - 1.0) < 1e-12);
                std::vector<double> xs{x};
                const auto B = build_basis(xs, knots, Interval{-1, 2});
                CHECK(std::abs(B.row(0).sum() - (1.0 - full[0])) < 1e-12);
            }
        }
    }

    TEST_CASE("column count law and nonnegativity") {
        Rng rng = make_stream(5, 0);
        std::vector<double> x(30);
        for (auto& v : x) v = uniform01(rng);
        for (int k = 0; k <= 12; ++k) {
            const auto knots = random_knots(rng, k, 0.0, 1.0);
            const auto B = build_basis(x, knots, Interval{0, 1});
            CHECK(B.cols() == k + kSplineDegree);
            CHECK(B.allFinite());
            CHECK((B.array() >= 0.0).all());
        }
    }

    TEST_CASE("basis rows agree with whole-matrix evaluation and are deterministic") {
        const std::vector<double> knots{0.2, 0.5, 0.55};
        const std::vector<double> x{0.0, 0.2, 0.51, 0.99, 1.0};
        const auto B1 = build_basis(x, knots, Interval{0, 1});
        const auto B2 = build_basis(x, knots, Interval{0, 1});
        CHECK((B1.array() == B2.array()).all());
        for (std::size_t i = 0; i < x.size(); ++i) {
            Eigen::RowVectorXd row(6);
            basis_row(x[i], knots, Interval{0, 1}, row);
            CHECK((row.array() == B1.row(static_cast<Eigen::Index>(i)).array()).all());
        }
    }

    TEST_CASE("invalid knots or covariates throw") {
        const std::vector<double> x{0.5};
        CHECK_THROWS(build_basis(x, std::vector<double>{1.0}, Interval{0, 1}));
        CHECK_THROWS(build_basis(x, std::vector<double>{0.0}, Interval{0, 1}));
        CHECK_THROWS(build_basis(x, std::vector<double>{0.6, 0.4}, Interval{0, 1}));
        CHECK_THROWS(build_basis(x, std::vector<double>{NAN}, Interval{0, 1}));
        CHECK_THROWS(build_basis(std::vector<double>{1.5}, {}, Interval{0, 1}));
        CHECK_THROWS(build_basis(std::vector<double>{INFINITY}, {}, Interval{0, 1}));
    }

    TEST_CASE("knot state bookkeeping") {
        KnotState ks({0.1, 0.2, 0.3, 0.4});
        CHECK(ks.count() == 0);
        ks.activate(1);
        ks.activate(3);
        ks.activate(3);
        CHECK(ks.count() == 2);
        CHECK(ks.active_positions() == std::vector<double>{0.2, 0.4});
        CHECK(ks.vacant_indices() == std::vector<int>{0, 2});
        CHECK(ks.mask() == 0b1010u);
        // Strict window: 0.1 is exactly 0.1 away from 0.2 and excluded.
        CHECK(ks.vacant_within(0.2, 0.1 + 1e-12) == std::vector<int>{0, 2});
        CHECK(ks.vacant_within(0.25, 0.04).empty());
        ks.deactivate(1);
        CHECK(ks.count() == 1);
        KnotState copy = ks;
        CHECK(copy == ks);
        ks.clear();
        CHECK(ks.count() == 0);
        CHECK_FALSE(copy == ks);
        CHECK_THROWS(ks.activate(7));
    }

    TEST_CASE("median spacing") {
        CHECK(median_spacing(std::vector<double>{0.1, 0.2, 0.4, 0.5}) == doctest::Approx(0.1));
        CHECK(median_spacing(std::vector<double>{0.5}) == 0.0);
    }

    TEST_CASE("interval clamp") {
        const Interval b{0.2, 0.8};
        CHECK(b.clamp(0.1) == 0.2);
        CHECK(b.clamp(0.9) == 0.8);
        CHECK(b.clamp(0.5) == 0.5);
    }
}
