#include "doctest.h"

#include <cmath>

#include "hardcl/errors.hpp"
#include "hardcl/losses.hpp"
#include "hardcl/rng.hpp"
#include "test_util.hpp"

using namespace hardcl;
using namespace hardcl::testutil;

namespace {

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

// embedder that maps every input to the same point on the sphere
Embedder constant_embedder(std::size_t in_dim) {
    Embedder e({in_dim, 3});
    e.bias(0) = Vec{3.0, 0.0, 4.0};
    return e;
}

} // namespace

TEST_CASE("psi_k scalar values") {
    // equal positive and negative similarities cancel
    Vec negs{0.7, 0.7, 0.7};
    CHECK(psi_k(0.7, negs) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

    // direct scalar evaluation: log(1 + e^{-1})
    Vec one_neg{0.0};
    CHECK(psi_k(1.0, one_neg) == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-14));

    CHECK_THROWS_AS(psi_k(0.0, Vec{}), InputError);
}

TEST_CASE("psi_k with constant negatives equals psi_inf") {
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        double gp = rng.uniform(-2.0, 2.0);
        double gn = rng.uniform(-2.0, 2.0);
        std::size_t k = std::size_t{1} << rng.uniform_index(8); // powers of two sum exactly
        Vec negs(k, gn);
        CHECK(psi_k(gp, negs) == psi_inf(gp, std::exp(gn)));
    }
}

TEST_CASE("psi_k monotonicity") {
    Rng rng(17);
    for (int t = 0; t < 200; ++t) {
        double gp = rng.uniform(-2.0, 2.0);
        Vec negs(1 + rng.uniform_index(8));
        for (auto& g : negs) g = rng.uniform(-2.0, 2.0);
        double base = psi_k(gp, negs);
        CHECK(psi_k(gp + 0.1, negs) < base); // decreasing in the positive similarity
        Vec bumped = negs;
        bumped[rng.uniform_index(bumped.size())] += 0.1;
        CHECK(psi_k(gp, bumped) > base); // increasing in each negative
        CHECK(base > 0.0);
        CHECK(base <= std::log(1.0 + std::exp(4.0)) + 1e-12); // gamma = 0.5 bound
    }
}

TEST_CASE("psi_k is permutation invariant") {
    Rng rng(23);
    Vec negs(9);
    for (auto& g : negs) g = rng.uniform(-2.0, 2.0);
    double base = psi_k(0.3, negs);
    for (int t = 0; t < 20; ++t) {
        rng.shuffle(negs);
        CHECK(psi_k(0.3, negs) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("psi_inf scalar values") {
    CHECK(psi_inf(0.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(psi_inf(2.0, std::exp(2.0)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    // direct scalar evaluation: log(1 + 2 e^{-1})
    CHECK(psi_inf(1.0, 2.0) ==
          doctest::Approx(std::log(1.0 + 2.0 * std::exp(-1.0))).epsilon(1e-14));

    CHECK_THROWS_AS(psi_inf(0.0, 0.0), InputError);
    CHECK_THROWS_AS(psi_inf(0.0, -1.0), InputError);
}

TEST_CASE("exact loss is log 2 when every embedding coincides") {
    Population pop = toy4();
    Embedder e = constant_embedder(2);
    SimilarityParams p{0.5};
    PositivePairing pairing;
    for (std::size_t i = 0; i < pop.size(); ++i)
        pairing.push_back(PositivePair{i, pop.point(i).features});

    for (Setting s : {Setting::Ucl, Setting::Scl, Setting::HUcl, Setting::HScl, Setting::HCol}) {
        NegSamplingSpec spec{s, HardeningSpec::exp_tilt(1.3)};
        LossReport r = loss_exact(pop, spec, e, p, pairing);
        CHECK(r.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
        CHECK(r.stderr_ == 0.0);
        CHECK_FALSE(r.k.has_value());
    }
}

TEST_CASE("exact loss matches a full manual enumeration") {
    Population pop = toy4();
    EmbeddingTable table = identity_table(pop);
    SimilarityParams p{0.5};

    std::vector<std::size_t> anchors{0, 1, 2, 3};
    EmbeddingTable positives{table[1], table[0], table[3], table[2]}; // same-class partner

    HardeningSpec h = HardeningSpec::exp_tilt(1.0);
    NegSamplingSpec spec{Setting::HScl, h};

    // oracle: plain loops straight from the definitions
    double expected = 0.0;
    for (std::size_t idx = 0; idx < anchors.size(); ++idx) {
        std::size_t a = anchors[idx];
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < pop.size(); ++j) {
            if (pop.point(j).label == pop.point(a).label) continue;
            double g = dot(table[a].coords, table[j].coords) / p.gamma;
            double w = pop.base_weights()[j] * std::exp(1.0 * g);
            num += w * std::exp(g);
            den += w;
        }
        double gp = dot(table[a].coords, positives[idx].coords) / p.gamma;
        expected += std::log(1.0 + std::exp(-gp) * num / den);
    }
    expected /= 4.0;

    auto res = loss_exact_table(pop, spec, table, anchors, positives, p,
                                ZeroNegativePolicy::Fatal);
    CHECK(res.report.value == doctest::Approx(expected).epsilon(1e-12));
    CHECK(res.pairs_skipped == 0);
}

TEST_CASE("identity hardening collapses hardened losses onto UCL and SCL") {
    Population pop = toy4();
    EmbeddingTable table = identity_table(pop);
    SimilarityParams p{0.5};
    std::vector<std::size_t> anchors{0, 1, 2, 3};
    EmbeddingTable positives{table[1], table[0], table[3], table[2]};

    auto value = [&](Setting s, HardeningSpec h) {
        return loss_exact_table(pop, NegSamplingSpec{s, h}, table, anchors, positives, p,
                                ZeroNegativePolicy::Fatal)
            .report.value;
    };
    CHECK(value(Setting::HUcl, HardeningSpec::identity()) ==
          value(Setting::Ucl, HardeningSpec::identity()));
    CHECK(value(Setting::HScl, HardeningSpec::identity()) ==
          value(Setting::Scl, HardeningSpec::identity()));
}

TEST_CASE("exact loss propagates empty support with the anchor id") {
    Population pop = toy4();
    EmbeddingTable table = identity_table(pop);
    SimilarityParams p{0.5};
    std::vector<std::size_t> anchors{2};
    EmbeddingTable positives{table[3]};
    NegSamplingSpec spec{Setting::HScl, HardeningSpec::threshold(std::exp(3.0))};
    try {
        loss_exact_table(pop, spec, table, anchors, positives, p, ZeroNegativePolicy::Fatal);
        FAIL("expected ZeroMassError");
    } catch (const ZeroMassError& e) {
        CHECK(std::string(e.what()).find("anchor 2") != std::string::npos);
    }
    // tolerant mode skips and reports
    CHECK_THROWS_AS(loss_exact_table(pop, spec, table, anchors, positives, p,
                                     ZeroNegativePolicy::Skip),
                    ZeroMassError); // every pair skipped is still an error
}

TEST_CASE("monte carlo loss is deterministic and degenerate cases have zero spread") {
    std::vector<LabeledPoint> pts;
    pts.push_back({Vec{1.0, 0.0}, 0});
    pts.push_back({Vec{0.0, 1.0}, 1});
    pts.push_back({Vec{-1.0, 0.0}, 1});
    // point mass on index 1
    Population pop(std::move(pts), Vec{0.0, 1.0, 0.0});

    Rng rng(3);
    Embedder f = Embedder::random_init({2, 6, 3}, rng);
    SimilarityParams p{0.5};
    PositivePairing pairing{{0, Vec{1.0, 0.1}}};

    NegSamplingSpec spec{Setting::Ucl, HardeningSpec::identity()};
    LossReport a = loss_mc(pop, spec, f, p, pairing, 64, 100, 12345);
    LossReport b = loss_mc(pop, spec, f, p, pairing, 64, 100, 12345);
    CHECK(a.value == b.value);
    CHECK(a.stderr_ == b.stderr_);
    CHECK(a.stderr_ == 0.0); // single pair, point-mass negatives
    CHECK(a.k == std::size_t{64});

    CHECK_THROWS_AS(loss_mc(pop, spec, f, p, pairing, 0, 100, 1), InputError);
    CHECK_THROWS_AS(loss_mc(pop, spec, f, p, pairing, 8, 1, 1), InputError);
}

TEST_CASE("monte carlo loss approaches the exact loss") {
    Population pop = toy4();
    Rng rng(9);
    Embedder f = Embedder::random_init({2, 8, 4}, rng);
    SimilarityParams p{0.5};
    PositivePairing pairing;
    for (std::size_t i = 0; i < pop.size(); ++i)
        pairing.push_back(PositivePair{i, pop.point(i).features});

    NegSamplingSpec spec{Setting::HUcl, HardeningSpec::exp_tilt(1.0)};
    LossReport exact = loss_exact(pop, spec, f, p, pairing);
    LossReport mc = loss_mc(pop, spec, f, p, pairing, 2000, 4000, 777);
    CHECK(std::fabs(mc.value - exact.value) <= 3.0 * mc.stderr_ + 1e-4);
    CHECK(mc.stderr_ > 0.0);
    CHECK(mc.n_anchor_draws == 4000);
}

TEST_CASE("monte carlo estimator is unbiased for the finite-k loss") {
    Population pop = toy4();
    Rng rng(31);
    Embedder f = Embedder::random_init({2, 6, 3}, rng);
    SimilarityParams p{0.5};
    PositivePairing pairing;
    for (std::size_t i = 0; i < pop.size(); ++i)
        pairing.push_back(PositivePair{i, pop.point(i).features});
    NegSamplingSpec spec{Setting::Scl, HardeningSpec::identity()};

    const std::size_t k = 16;
    LossReport reference = loss_mc(pop, spec, f, p, pairing, k, 400000, 999);

    KahanSum sum, sumsq;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        LossReport est = loss_mc(pop, spec, f, p, pairing, k, 200, 1000 + r);
        sum.add(est.value);
        sumsq.add(est.value * est.value);
    }
    double mean = sum.value() / reps;
    double var = (sumsq.value() - reps * mean * mean) / (reps - 1.0);
    double se_mean = std::sqrt(var / reps);
    double combined = std::sqrt(se_mean * se_mean + reference.stderr_ * reference.stderr_);
    CHECK(std::fabs(mean - reference.value) <= 4.0 * combined);
}

TEST_CASE("loss reports serialize to CSV") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "hardcl_losses";
    fs::create_directories(dir);
    auto path = (dir / "losses.csv").string();

    std::vector<LossReport> reports(2);
    reports[0].spec = NegSamplingSpec{Setting::Ucl, HardeningSpec::identity()};
    reports[0].value = 0.75;
    reports[1].spec = NegSamplingSpec{Setting::HScl, HardeningSpec::exp_tilt(1.0)};
    reports[1].value = 0.25;
    reports[1].k = 32;
    reports[1].stderr_ = 0.01;
    reports[1].n_anchor_draws = 100;
    reports[1].seed = 7;
    write_loss_reports_csv(path, reports);

    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "setting,k,value,stderr,n_anchor_draws,seed");
    std::getline(is, line);
    CHECK(line == "UCL,inf,0.75,0,0,0");
    std::getline(is, line);
    CHECK(line.find("H-SCL") == 0);
    CHECK(line.find(",32,0.25,0.01,100,7") != std::string::npos);
}

TEST_CASE("batch loss reduces to plain InfoNCE with M = 1 and no tilt") {
    Rng rng(41);
    Embedder f = Embedder::random_init({3, 8, 4}, rng);
    SimilarityParams p{0.5};

    Batch batch;
    for (int i = 0; i < 4; ++i) { // all distinct classes
        BatchItem item;
        item.label = i;
        item.anchor_features = Vec{rng.normal(), rng.normal(), rng.normal()};
        item.positive_features = Vec{rng.normal(), rng.normal(), rng.normal()};
        batch.push_back(std::move(item));
    }
    NegSamplingSpec spec{Setting::Ucl, HardeningSpec::identity()};
    BatchLossResult res = batch_loss_eq1(batch, f, spec, 1.0, p);

    // oracle: psi_inf with the plain batch mean over the 2B-2 views
    EmbeddingTable emb;
    for (const auto& it : batch) emb.push_back(f.forward(it.anchor_features));
    for (const auto& it : batch) emb.push_back(f.forward(it.positive_features));
    double expected = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        double mean = 0.0;
        std::size_t count = 0;
        for (std::size_t j = 0; j < 8; ++j) {
            if (j == i || j == i + 4) continue;
            mean += std::exp(dot(emb[i].coords, emb[j].coords) / p.gamma);
            ++count;
        }
        mean /= static_cast<double>(count);
        expected += psi_inf(dot(emb[i].coords, emb[i + 4].coords) / p.gamma, mean);
    }
    expected /= 4.0;
    CHECK(res.loss == doctest::Approx(expected).epsilon(1e-12));
    CHECK(res.anchors_used == 4);
}

TEST_CASE("batch loss tilt is continuous as beta approaches zero") {
    Rng rng(43);
    Embedder f = Embedder::random_init({3, 6, 3}, rng);
    SimilarityParams p{0.5};
    Batch batch;
    for (int i = 0; i < 5; ++i) {
        BatchItem item;
        item.label = i % 2;
        item.anchor_features = Vec{rng.normal(), rng.normal(), rng.normal()};
        item.positive_features = Vec{rng.normal(), rng.normal(), rng.normal()};
        batch.push_back(std::move(item));
    }
    double with_identity =
        batch_loss_eq1(batch, f, NegSamplingSpec{Setting::HScl, HardeningSpec::identity()}, 3.0,
                       p)
            .loss;
    double with_tiny_beta =
        batch_loss_eq1(batch, f, NegSamplingSpec{Setting::HScl, HardeningSpec::exp_tilt(1e-12)},
                       3.0, p)
            .loss;
    CHECK(std::fabs(with_identity - with_tiny_beta) <= 1e-9);
}

TEST_CASE("batch loss matches a hand importance-weighted computation") {
    Rng rng(47);
    Embedder f = Embedder::random_init({2, 7, 3}, rng);
    SimilarityParams p{0.5};
    const double beta = 1.0, M = 2.0;

    Batch batch;
    for (int i = 0; i < 4; ++i) {
        BatchItem item;
        item.label = i < 2 ? 0 : 1;
        item.anchor_features = Vec{rng.normal(), rng.normal()};
        item.positive_features = Vec{rng.normal(), rng.normal()};
        batch.push_back(std::move(item));
    }
    NegSamplingSpec spec{Setting::HScl, HardeningSpec::exp_tilt(beta)};
    BatchLossResult res = batch_loss_eq1(batch, f, spec, M, p);

    EmbeddingTable emb;
    for (const auto& it : batch) emb.push_back(f.forward(it.anchor_features));
    for (const auto& it : batch) emb.push_back(f.forward(it.positive_features));
    double expected = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < 8; ++j) {
            if (j == i || j == i + 4) continue;
            if (batch[j % 4].label == batch[i].label) continue;
            double g = dot(emb[i].coords, emb[j].coords) / p.gamma;
            num += std::exp(beta * g) * std::exp(g);
            den += std::exp(beta * g);
        }
        double gp = dot(emb[i].coords, emb[i + 4].coords) / p.gamma;
        expected += std::log(1.0 + M * std::exp(-gp) * num / den);
    }
    expected /= 4.0;
    CHECK(res.loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("batch composition errors") {
    Rng rng(53);
    Embedder f = Embedder::random_init({2, 5, 3}, rng);
    SimilarityParams p{0.5};

    Batch same_class;
    for (int i = 0; i < 3; ++i) {
        BatchItem item;
        item.label = 0;
        item.anchor_features = Vec{rng.normal(), rng.normal()};
        item.positive_features = Vec{rng.normal(), rng.normal()};
        same_class.push_back(std::move(item));
    }
    NegSamplingSpec scl{Setting::Scl, HardeningSpec::identity()};
    try {
        batch_loss_eq1(same_class, f, scl, 1.0, p, ZeroNegativePolicy::Fatal);
        FAIL("expected ZeroMassError");
    } catch (const ZeroMassError& e) {
        CHECK(std::string(e.what()).find("anchor 0") != std::string::npos);
    }
    // with no anchor usable, skipping cannot rescue the batch
    CHECK_THROWS_AS(batch_loss_eq1(same_class, f, scl, 1.0, p, ZeroNegativePolicy::Skip),
                    ZeroMassError);

    // one odd-class element out: its anchor is the only usable one
    Batch mixed = same_class;
    BatchItem odd;
    odd.label = 1;
    odd.anchor_features = Vec{0.3, -0.2};
    odd.positive_features = Vec{0.1, 0.4};
    mixed.push_back(std::move(odd));
    BatchLossResult res = batch_loss_eq1(mixed, f, scl, 1.0, p, ZeroNegativePolicy::Skip);
    CHECK(res.anchors_used == 4); // every anchor has at least one cross-class view
    CHECK(res.anchors_skipped == 0);

    CHECK_THROWS_AS(batch_loss_eq1(mixed, f, NegSamplingSpec{Setting::HCol, {}}, 1.0, p),
                    InputError);
    CHECK_THROWS_AS(batch_loss_eq1(mixed, f, scl, 0.0, p), InputError);
    CHECK_THROWS_AS(batch_loss_eq1(Batch{}, f, scl, 1.0, p), InputError);
}
