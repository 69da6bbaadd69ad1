#include "conceptscope/numerics.hpp"
#include "conceptscope/rng.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <cmath>

using namespace conceptscope;

namespace {

std::vector<double> random_values(Rng & rng, std::size_t n, bool ties) {
    std::vector<double> v(n);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto & x : v) {
        x = ties ? std::round(nd(rng) * 2.0) : nd(rng);
    }
    return v;
}

} // namespace

TEST_CASE("rank_with_ties averages tied ranks") {
    const Vec r = rank_with_ties(Vec{10.0, 20.0, 20.0, 30.0, 5.0});
    CHECK(r == Vec{2.0, 3.5, 3.5, 5.0, 1.0});
}

TEST_CASE("spearman matches the brute-force oracle on random pairs") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + uniform_index(rng, 60);
        const bool ties = trial % 2 == 0;
        auto x = random_values(rng, n, ties);
        auto y = random_values(rng, n, ties);
        x[0] = -100.0; // guarantees at least two distinct values
        x[1] = 100.0;
        y[0] = 100.0;
        y[1] = -100.0;
        CHECK(spearman_rho(Vec(x), Vec(y)) == doctest::Approx(oracle::spearman(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("spearman is invariant under monotone transforms and flips under negation") {
    Rng rng(5);
    const auto x = random_values(rng, 40, false);
    const auto y = random_values(rng, 40, false);
    std::vector<double> x_exp;
    std::vector<double> y_neg;
    for (double v : x) {
        x_exp.push_back(std::exp(3.0 * v));
    }
    for (double v : y) {
        y_neg.push_back(-v);
    }
    const double rho = spearman_rho(Vec(x), Vec(y));
    CHECK(spearman_rho(Vec(x_exp), Vec(y)) == doctest::Approx(rho).epsilon(1e-12));
    CHECK(spearman_rho(Vec(x), Vec(y_neg)) == doctest::Approx(-rho).epsilon(1e-12));
    CHECK(spearman_rho(Vec(x), Vec(x)) == doctest::Approx(1.0));
}

TEST_CASE("spearman rejects degenerate inputs") {
    CHECK_THROWS_AS(spearman_rho(Vec{1.0, 2.0}, Vec{1.0, 2.0, 3.0}), NumericsError);
    CHECK_THROWS_AS(spearman_rho(Vec{1.0}, Vec{1.0}), NumericsError);
    CHECK_THROWS_AS(spearman_rho(Vec{1.0, 1.0, 1.0}, Vec{1.0, 2.0, 3.0}), NumericsError);
}

TEST_CASE("cosine matches the oracle and rejects zero vectors") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto u = random_values(rng, 17, false);
        const auto v = random_values(rng, 17, false);
        CHECK(cosine(Vec(u), Vec(v)) == doctest::Approx(oracle::cosine(u, v)).epsilon(1e-12));
    }
    CHECK(cosine(Vec{1.0, 0.0}, Vec{2.0, 0.0}) == doctest::Approx(1.0));
    CHECK(cosine(Vec{1.0, 0.0}, Vec{-3.0, 0.0}) == doctest::Approx(-1.0));
    CHECK(cosine(Vec{1.0, 0.0}, Vec{0.0, 4.0}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(cosine(Vec{0.0, 0.0}, Vec{1.0, 0.0}), NumericsError);
    CHECK_THROWS_AS(cosine(Vec{1.0}, Vec{1.0, 0.0}), NumericsError);
}

TEST_CASE("lower_triangle reads strictly-below-diagonal entries row by row") {
    Matrix m(3, 3);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
            m(r, c) = static_cast<double>(10 * r + c);
        }
    }
    CHECK(lower_triangle(m) == Vec{10.0, 20.0, 21.0});
}

TEST_CASE("mean_vector averages element-wise") {
    const std::vector<Vec> vs = {Vec{1.0, 2.0}, Vec{3.0, 6.0}};
    CHECK(mean_vector(vs) == Vec{2.0, 4.0});
    CHECK_THROWS(mean_vector(std::vector<Vec>{}));
}

TEST_CASE("substreams are deterministic and distinct") {
    CHECK(substream_seed(1, "data") == substream_seed(1, "data"));
    CHECK(substream_seed(1, "data") != substream_seed(1, "train"));
    CHECK(substream_seed(1, "data") != substream_seed(2, "data"));
    Rng rng(9);
    const auto idx = sample_without_replacement(rng, 10, 10);
    std::vector<bool> seen(10, false);
    for (auto i : idx) {
        CHECK_FALSE(seen[i]);
        seen[i] = true;
    }
}
