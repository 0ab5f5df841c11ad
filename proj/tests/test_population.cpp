#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hardcl/errors.hpp"
#include "hardcl/population.hpp"
#include "hardcl/rng.hpp"

using namespace hardcl;

namespace {

// four points on the 2-sphere, two balanced classes, uniform weights
Population toy4() {
    std::vector<LabeledPoint> pts;
    pts.push_back({Vec{1.0, 0.0}, 0});
    pts.push_back({Vec{0.0, 1.0}, 0});
    pts.push_back({Vec{-1.0, 0.0}, 1});
    pts.push_back({Vec{0.0, -1.0}, 1});
    return Population::with_uniform_weights(std::move(pts));
}

EmbeddingTable identity_table(const Population& pop) {
    EmbeddingTable t;
    for (std::size_t i = 0; i < pop.size(); ++i) t.push_back(normalize(pop.point(i).features));
    return t;
}

} // namespace

TEST_CASE("population invariants") {
    std::vector<LabeledPoint> one_class{{Vec{1.0, 0.0}, 0}, {Vec{0.0, 1.0}, 0}};
    CHECK_THROWS_AS(Population::with_uniform_weights(std::move(one_class)), InputError);

    std::vector<LabeledPoint> pts{{Vec{1.0, 0.0}, 0}, {Vec{0.0, 1.0}, 1}};
    CHECK_THROWS_AS(Population(std::move(pts), Vec{0.7, 0.2}), InputError); // sums to 0.9

    std::vector<LabeledPoint> pts2{{Vec{1.0, 0.0}, 0}, {Vec{0.0, 1.0}, 1}};
    CHECK_THROWS_AS(Population(std::move(pts2), Vec{1.5, -0.5}), InputError);

    std::vector<LabeledPoint> ragged{{Vec{1.0, 0.0}, 0}, {Vec{0.0, 1.0, 2.0}, 1}};
    CHECK_THROWS_AS(Population::with_uniform_weights(std::move(ragged)), InputError);
}

TEST_CASE("tilt identity and hand-enumerated example") {
    // dyadic masses so the normalizer is exactly 1
    Vec p{0.25, 0.25, 0.5};
    Vec ones{1.0, 1.0, 1.0};
    CHECK(tilt(p, ones) == p); // bit-exact identity tilt

    // uniform over two points, rho = (1,3): alpha = 2
    Vec p2{0.5, 0.5};
    Vec rho{1.0, 3.0};
    Vec r = tilt(p2, rho);
    CHECK(r[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(r[1] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("tilt error paths") {
    CHECK_THROWS_AS(tilt(Vec{1.0, 0.0}, Vec{0.0, 5.0}), ZeroMassError); // disjoint support
    CHECK_THROWS_AS(tilt(Vec{0.5, 0.5}, Vec{-1.0, 2.0}), InputError);
    CHECK_THROWS_AS(tilt(Vec{0.5, 0.5}, Vec{1.0}), InputError);
    CHECK_THROWS_AS(tilt(Vec{}, Vec{}), InputError);
}

TEST_CASE("tilting produces a distribution and preserves expectations") {
    Rng rng(101);
    for (int t = 0; t < 1000; ++t) {
        std::size_t n = 2 + rng.uniform_index(30);
        Vec p(n);
        double total = 0.0;
        for (auto& x : p) {
            x = rng.uniform(0.01, 1.0);
            total += x;
        }
        for (auto& x : p) x /= total;
        Vec rho(n);
        for (auto& x : rho) x = rng.uniform() < 0.25 ? 0.0 : rng.uniform(0.0, 2.0);
        rho[rng.uniform_index(n)] = rng.uniform(0.5, 2.0);
        Vec s(n);
        for (auto& x : s) x = rng.uniform(-1.0, 1.0);

        Vec r = tilt(p, rho);
        KahanSum rsum, mass, weighted;
        for (std::size_t i = 0; i < n; ++i) {
            rsum.add(r[i]);
            mass.add(rho[i] * p[i]);
            weighted.add(rho[i] * p[i] * s[i]);
        }
        CHECK(std::fabs(rsum.value() - 1.0) <= 1e-12);
        CHECK(std::fabs(expected_under(r, s) - weighted.value() / mass.value()) <= 1e-12);
    }
}

TEST_CASE("expected_under basics") {
    Vec dist{0.25, 0.25, 0.5};
    CHECK(expected_under(dist, Vec{3.0, 3.0, 3.0}) == doctest::Approx(3.0).epsilon(1e-15));
    Vec point{0.0, 1.0, 0.0};
    CHECK(expected_under(point, Vec{5.0, -2.0, 9.0}) == -2.0);
    CHECK_THROWS_AS(expected_under(dist, Vec{1.0}), InputError);
}

TEST_CASE("normalizers at one anchor, hand enumeration") {
    Population pop = toy4();
    EmbeddingTable table = identity_table(pop);
    SimilarityParams p{0.5};
    Vec g_row = similarity_row(table[0], table, p);

    auto a = compute_alphas_row(pop, 0, g_row, HardeningSpec::identity());
    CHECK(a.alpha_hucl == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a.alpha_scl == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a.alpha_hcol == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a.alpha_hscl == doctest::Approx(0.5).epsilon(1e-15));

    // exp tilt beta=1 at gamma=0.5: g to (1,0),(0,1),(-1,0),(0,-1) is 2,0,-2,0
    auto b = compute_alphas_row(pop, 0, g_row, HardeningSpec::exp_tilt(1.0));
    double e2 = std::exp(2.0), em2 = std::exp(-2.0);
    CHECK(b.alpha_hucl == doctest::Approx(0.25 * (e2 + 1.0 + em2 + 1.0)).epsilon(1e-14));
    CHECK(b.alpha_hscl == doctest::Approx(0.25 * (em2 + 1.0)).epsilon(1e-14));
    CHECK(b.alpha_hcol == doctest::Approx(0.25 * (e2 + 1.0)).epsilon(1e-14));
}

TEST_CASE("normalizer decomposition holds for random rows") {
    Rng rng(211);
    Population pop = toy4();
    for (int t = 0; t < 300; ++t) {
        Vec g_row(4);
        for (auto& g : g_row) g = rng.uniform(-2.0, 2.0);
        HardeningSpec h = t % 3 == 0   ? HardeningSpec::identity()
                          : t % 3 == 1 ? HardeningSpec::exp_tilt(rng.uniform(0.1, 2.0))
                                       : HardeningSpec::threshold(rng.uniform(0.2, 3.0));
        auto a = compute_alphas_row(pop, rng.uniform_index(4), g_row, h);
        CHECK(std::fabs(a.alpha_hucl - (a.alpha_hscl + a.alpha_hcol)) <= 1e-12);
    }
}

TEST_CASE("negative-sampling distributions per setting") {
    Population pop = toy4();
    EmbeddingTable table = identity_table(pop);
    SimilarityParams p{0.5};
    Vec g_row = similarity_row(table[0], table, p);

    NegSamplingSpec ucl{Setting::Ucl, HardeningSpec::identity()};
    CHECK(neg_distribution_row(pop, 0, ucl, g_row) == pop.base_weights()); // verbatim

    // SCL with uniform base: uniform over the other class
    NegSamplingSpec scl{Setting::Scl, HardeningSpec::identity()};
    Vec d_scl = neg_distribution_row(pop, 0, scl, g_row);
    CHECK(d_scl[0] == 0.0);
    CHECK(d_scl[1] == 0.0);
    CHECK(d_scl[2] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d_scl[3] == doctest::Approx(0.5).epsilon(1e-15));

    // identity hardening degeneracies are exact
    NegSamplingSpec hucl1{Setting::HUcl, HardeningSpec::identity()};
    CHECK(neg_distribution_row(pop, 0, hucl1, g_row) == pop.base_weights());
    NegSamplingSpec hscl1{Setting::HScl, HardeningSpec::identity()};
    CHECK(neg_distribution_row(pop, 0, hscl1, g_row) == d_scl);

    // UCL and SCL ignore a non-trivial hardening spec
    NegSamplingSpec ucl_hard{Setting::Ucl, HardeningSpec::exp_tilt(2.0)};
    CHECK(neg_distribution_row(pop, 0, ucl_hard, g_row) == pop.base_weights());

    // threshold H-SCL: base restricted to the hard set, renormalized
    double tau = std::exp(-1.0); // keeps g >= -1: excludes the antipodal point
    NegSamplingSpec hscl_t{Setting::HScl, HardeningSpec::threshold(tau)};
    Vec d_t = neg_distribution_row(pop, 0, hscl_t, g_row);
    CHECK(d_t[2] == 0.0); // g = -2 below threshold
    CHECK(d_t[3] == doctest::Approx(1.0).epsilon(1e-15));

    // Hcol: same-class conditioning
    NegSamplingSpec hcol{Setting::HCol, HardeningSpec::identity()};
    Vec d_c = neg_distribution_row(pop, 0, hcol, g_row);
    CHECK(d_c[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d_c[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d_c[2] == 0.0);
}

TEST_CASE("empty support raises a zero-mass error naming the setting") {
    Population pop = toy4();
    EmbeddingTable table = identity_table(pop);
    SimilarityParams p{0.5};
    Vec g_row = similarity_row(table[0], table, p);

    NegSamplingSpec spec{Setting::HScl, HardeningSpec::threshold(std::exp(3.0))}; // above e^{1/gamma}
    try {
        neg_distribution_row(pop, 0, spec, g_row);
        FAIL("expected ZeroMassError");
    } catch (const ZeroMassError& e) {
        std::string msg = e.what();
        CHECK(msg.find("H-SCL") != std::string::npos);
        CHECK(msg.find("anchor 0") != std::string::npos);
    }
}

TEST_CASE("exponential tilt stays finite for extreme beta") {
    Population pop = toy4();
    EmbeddingTable table = identity_table(pop);
    SimilarityParams p{0.5};
    Vec g_row = similarity_row(table[0], table, p);

    NegSamplingSpec spec{Setting::HUcl, HardeningSpec::exp_tilt(500.0)};
    Vec d = neg_distribution_row(pop, 0, spec, g_row);
    CHECK(all_finite(d));
    KahanSum s;
    for (double x : d) s.add(x);
    CHECK(std::fabs(s.value() - 1.0) <= 1e-12);
    CHECK(d[0] > 0.999); // beta*g = 1000 at the anchor dwarfs everything else
}

TEST_CASE("sample_negatives draws iid from the distribution") {
    Vec point_mass{0.0, 1.0, 0.0};
    auto idx = sample_negatives(point_mass, 50, 42);
    for (auto i : idx) CHECK(i == 1);

    auto again = sample_negatives(point_mass, 50, 42);
    CHECK(idx == again);

    CHECK_THROWS_AS(sample_negatives(point_mass, 0, 1), InputError);

    // uniform over two of three entries; binomial standard error bound
    Vec half{0.5, 0.0, 0.5};
    const std::size_t n = 1000000;
    auto draws = sample_negatives(half, n, 7);
    std::size_t c0 = 0, c1 = 0;
    for (auto i : draws) {
        if (i == 0) ++c0;
        if (i == 1) ++c1;
    }
    CHECK(c1 == 0); // zero-probability index never drawn
    double freq = static_cast<double>(c0) / static_cast<double>(n);
    double bound = 5.0 * std::sqrt(0.25 / static_cast<double>(n));
    CHECK(std::fabs(freq - 0.5) <= bound);
}

TEST_CASE("sampling frequencies match a skewed distribution") {
    Vec dist{0.1, 0.2, 0.0, 0.7};
    const std::size_t n = 1000000;
    auto draws = sample_negatives(dist, n, 99);
    std::vector<std::size_t> counts(4, 0);
    for (auto i : draws) ++counts[i];
    for (std::size_t j = 0; j < 4; ++j) {
        double pj = dist[j];
        double freq = static_cast<double>(counts[j]) / static_cast<double>(n);
        double bound = 5.0 * std::sqrt(pj * (1.0 - pj) / static_cast<double>(n));
        CHECK(std::fabs(freq - pj) <= bound + 1e-12);
    }
}

TEST_CASE("threshold hard sets partition the hard pool") {
    Population pop = toy4();
    EmbeddingTable table = identity_table(pop);
    SimilarityParams p{0.5};
    Vec g_row = similarity_row(table[0], table, p); // 2, 0, -2, 0

    // tau -> 0+: every point is hard
    HardSets all = hard_sets_row(pop, 0, g_row, 1e-9);
    CHECK(all.hucl.size() == 4);

    // tau above e^{1/gamma}: nothing is hard
    HardSets none = hard_sets_row(pop, 0, g_row, std::exp(2.0) + 1.0);
    CHECK(none.hucl.empty());
    CHECK(none.hscl.empty());
    CHECK(none.hcol.empty());

    // manual membership at tau = e^{-1}: keeps g in {2, 0, 0}
    HardSets mid = hard_sets_row(pop, 0, g_row, std::exp(-1.0));
    CHECK(mid.scl == std::vector<std::size_t>{2, 3});
    CHECK(mid.hucl == std::vector<std::size_t>{0, 1, 3});
    CHECK(mid.hscl == std::vector<std::size_t>{3});
    CHECK(mid.hcol == std::vector<std::size_t>{0, 1});

    // boundary tie is inclusive: tau exactly e^0 keeps the g = 0 points
    HardSets tie = hard_sets_row(pop, 0, g_row, 1.0);
    CHECK(tie.hucl == std::vector<std::size_t>{0, 1, 3});

    CHECK_THROWS_AS(hard_sets_row(pop, 0, g_row, 0.0), InputError);
}

TEST_CASE("hard sets satisfy the set identities on random rows") {
    Rng rng(997);
    Population pop = toy4();
    for (int t = 0; t < 200; ++t) {
        Vec g_row(4);
        for (auto& g : g_row) g = rng.uniform(-2.0, 2.0);
        double tau = rng.uniform(0.05, 8.0);
        std::size_t anchor = rng.uniform_index(4);
        HardSets s = hard_sets_row(pop, anchor, g_row, tau);

        std::vector<std::size_t> unions;
        unions.insert(unions.end(), s.hscl.begin(), s.hscl.end());
        unions.insert(unions.end(), s.hcol.begin(), s.hcol.end());
        std::sort(unions.begin(), unions.end());
        CHECK(unions == s.hucl); // disjoint partition of the hard pool

        for (auto j : s.hscl) {
            CHECK(pop.point(j).label != pop.point(anchor).label);
            CHECK(std::exp(g_row[j]) >= tau);
        }
        for (auto j : s.hcol) CHECK(pop.point(j).label == pop.point(anchor).label);
    }
}

TEST_CASE("population CSV round trip") {
    namespace fs = std::filesystem;
    Population pop = toy4();
    fs::path dir = fs::temp_directory_path() / "hardcl_pop_csv";
    fs::create_directories(dir);
    auto path = (dir / "pop.csv").string();
    pop.save_csv(path);

    Population back = Population::load_csv(path);
    REQUIRE(back.size() == pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
        CHECK(back.point(i).features == pop.point(i).features);
        CHECK(back.point(i).label == pop.point(i).label);
    }
    CHECK(back.base_weights() == pop.base_weights());

    // re-save must be byte-identical
    auto path2 = (dir / "pop2.csv").string();
    back.save_csv(path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}

TEST_CASE("population CSV error handling") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "hardcl_pop_csv";
    fs::create_directories(dir);

    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream os(dir / name, std::ios::binary);
        os << text;
        return (dir / name).string();
    };

    CHECK_THROWS_AS(Population::load_csv(write("empty.csv", "")), InputError);
    CHECK_THROWS_AS(Population::load_csv(write("header_only.csv", "f0,f1,label\n")), InputError);
    CHECK_THROWS_AS(Population::load_csv(write("no_label.csv", "f0,f1\n1,2\n")), InputError);
    CHECK_THROWS_AS(Population::load_csv(write("ragged.csv", "f0,f1,label\n1,2,0\n1,2\n")),
                    InputError);
    CHECK_THROWS_AS(Population::load_csv("/nonexistent/hopefully.csv"), InputError);

    // unnormalized weights are accepted and renormalized
    Population w = Population::load_csv(
        write("weighted.csv", "f0,f1,label,weight\n1,0,0,2\n0,1,1,6\n"));
    CHECK(w.base_weights()[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(w.base_weights()[1] == doctest::Approx(0.75).epsilon(1e-15));
}
