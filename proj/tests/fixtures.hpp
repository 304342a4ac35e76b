#pragma once

// Small synthetic datasets shared by the tests.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fkbma/model.hpp"
#include "fkbma/rng.hpp"
#include "fkbma/spline_basis.hpp"

namespace fixture {

/// Two binary markers, each a predictive and a tailoring candidate.
inline fkbma::Dataset binary_toy(int n, std::uint64_t seed) {
    fkbma::Rng rng = fkbma::make_stream(seed, 0);
    fkbma::Dataset d;
    d.y.resize(n);
    d.t.resize(n);
    d.x.resize(n, 0);
    d.z.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        d.t[i] = i % 2;
        d.z(i, 0) = fkbma::uniform01(rng) < 0.5 ? 1.0 : 0.0;
        d.z(i, 1) = fkbma::uniform01(rng) < 0.5 ? 1.0 : 0.0;
        d.y[i] = 0.2 + 0.4 * d.z(i, 0) + 0.5 * d.z(i, 0) * d.t[i] + 0.3 * d.z(i, 1) + fkbma::standard_normal(rng);
    }
    d.candidates = fkbma::CandidateSet({}, {0, 1}, {}, {0, 1}, {});
    return d;
}

/// One continuous marker with a main-effect spline term over `candidate_count` knots.
inline fkbma::Dataset spline_toy(int n, int candidate_count, std::uint64_t seed, double amplitude = 1.0,
                                 double noise = 0.5) {
    fkbma::Rng rng = fkbma::make_stream(seed, 0);
    fkbma::Dataset d;
    d.y.resize(n);
    d.t.resize(n);
    d.x.resize(n, 1);
    d.z.resize(n, 0);
    for (int i = 0; i < n; ++i) {
        d.t[i] = i % 2;
        d.x(i, 0) = fkbma::uniform01(rng);
        d.y[i] = amplitude * std::sin(2.0 * std::numbers::pi * d.x(i, 0)) + 0.3 * d.t[i] + noise * fkbma::standard_normal(rng);
    }
    std::vector<double> xs(d.x.data(), d.x.data() + n);
    fkbma::SplineDomain dom;
    dom.boundary = {*std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end())};
    dom.candidates = fkbma::candidate_knots(xs, candidate_count);
    d.candidates = fkbma::CandidateSet({0}, {}, {}, {}, {dom});
    return d;
}

/// One continuous and two binary markers, all in both roles; used for fuzzing.
inline fkbma::Dataset mixed(int n, std::uint64_t seed) {
    fkbma::Rng rng = fkbma::make_stream(seed, 0);
    fkbma::Dataset d;
    d.y.resize(n);
    d.t.resize(n);
    d.x.resize(n, 1);
    d.z.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        d.t[i] = fkbma::uniform01(rng) < 0.5 ? 1.0 : 0.0;
        d.x(i, 0) = fkbma::uniform01(rng);
        d.z(i, 0) = fkbma::uniform01(rng) < 0.4 ? 1.0 : 0.0;
        d.z(i, 1) = fkbma::uniform01(rng) < 0.6 ? 1.0 : 0.0;
        d.y[i] = std::cos(2.0 * std::numbers::pi * d.x(i, 0)) * d.t[i] + 0.5 * d.z(i, 0) +
                 fkbma::standard_normal(rng);
    }
    std::vector<double> xs(d.x.data(), d.x.data() + n);
    fkbma::SplineDomain dom;
    dom.boundary = {*std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end())};
    dom.candidates = fkbma::candidate_knots(xs, 9);
    d.candidates = fkbma::CandidateSet({0}, {0, 1}, {0}, {0, 1}, {dom});
    return d;
}

}  // namespace fixture
