#include "doctest.h"

#include <cmath>

#include "hardcl/errors.hpp"
#include "hardcl/geometry.hpp"
#include "hardcl/rng.hpp"

using namespace hardcl;

TEST_CASE("normalize scales to the unit sphere") {
    Vec v{3.0, 4.0};
    auto e = normalize(v);
    CHECK(e.coords[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(e.coords[1] == doctest::Approx(0.8).epsilon(1e-12));

    Vec unit{0.0, 1.0};
    auto u = normalize(unit);
    CHECK(u.coords[0] == 0.0);
    CHECK(u.coords[1] == 1.0);

    // norm of (1,1,1,1) is 2, so every coordinate halves
    Vec ones{1.0, 1.0, 1.0, 1.0};
    auto q = normalize(ones);
    for (double c : q.coords) CHECK(c == doctest::Approx(1.0 / 2.0).epsilon(1e-15));
}

TEST_CASE("normalize rejects degenerate input") {
    CHECK_THROWS_AS(normalize(Vec{0.0, 0.0}), InputError);
    CHECK_THROWS_AS(normalize(Vec{1e-13, 0.0}), InputError);
    CHECK_THROWS_AS(normalize(Vec{5.0}), InputError);
    CHECK_THROWS_AS(normalize(Vec{1.0, std::nan("")}), InputError);
}

TEST_CASE("normalized vectors have unit norm") {
    Rng rng(7);
    for (int t = 0; t < 200; ++t) {
        std::size_t d = 2 + rng.uniform_index(15);
        Vec v(d);
        for (auto& x : v) x = rng.normal() * std::exp(rng.uniform(-3.0, 3.0));
        auto e = normalize(v);
        CHECK(std::fabs(norm2(e.coords) - 1.0) <= 1e-6);
    }
}

TEST_CASE("similarity values") {
    SimilarityParams p{0.5};
    auto a = normalize(Vec{3.0, 4.0});
    CHECK(similarity(a, a, p) == doctest::Approx(2.0).epsilon(1e-12)); // 1/gamma

    auto e1 = normalize(Vec{1.0, 0.0});
    auto e2 = normalize(Vec{0.0, 1.0});
    CHECK(similarity(e1, e2, p) == 0.0);
    CHECK(similarity(e1, e2, SimilarityParams{0.17}) == 0.0);

    // hand dot product: 0.6 / 0.5
    CHECK(similarity(a, e1, p) == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("similarity is symmetric and bounded by 1/gamma") {
    Rng rng(11);
    for (int t = 0; t < 500; ++t) {
        std::size_t d = 2 + rng.uniform_index(10);
        Vec va(d), vb(d);
        for (auto& x : va) x = rng.normal();
        for (auto& x : vb) x = rng.normal();
        auto a = normalize(va);
        auto b = normalize(vb);
        SimilarityParams p{rng.uniform(0.1, 3.0)};
        double gab = similarity(a, b, p);
        CHECK(gab == similarity(b, a, p)); // bit-exact
        CHECK(std::fabs(gab) <= 1.0 / p.gamma + 1e-9);
    }
}

TEST_CASE("similarity input validation") {
    auto a = normalize(Vec{1.0, 0.0});
    auto b = normalize(Vec{1.0, 0.0, 0.0});
    CHECK_THROWS_AS(similarity(a, b, SimilarityParams{0.5}), InputError);
    CHECK_THROWS_AS(similarity(a, a, SimilarityParams{0.0}), InputError);
    CHECK_THROWS_AS(similarity(a, a, SimilarityParams{-1.0}), InputError);
}
