#include "hardcl/instances.hpp"

#include <algorithm>
#include <cmath>

#include "hardcl/errors.hpp"
#include "hardcl/synth.hpp"

namespace hardcl {

namespace {

Vec unit_vector(std::size_t dim, Rng& rng) {
    Vec v(dim);
    double n = 0.0;
    do {
        for (auto& x : v) x = rng.normal();
        n = norm2(v);
    } while (n < 1e-9);
    for (auto& x : v) x /= n;
    return v;
}

HardeningSpec random_hardening(Rng& rng, const std::vector<Vec>& g_rows, const Population& pop) {
    double u = rng.uniform();
    if (u < 0.25) return HardeningSpec::identity();
    if (u < 0.75) return HardeningSpec::exp_tilt(rng.uniform(0.2, 2.0));

    // threshold low enough that every anchor keeps at least one
    // differently-labeled point above it
    double min_max_cross = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pop.size(); ++i) {
        double max_cross = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < pop.size(); ++j)
            if (pop.point(j).label != pop.point(i).label)
                max_cross = std::max(max_cross, g_rows[i][j]);
        min_max_cross = std::min(min_max_cross, max_cross);
    }
    return HardeningSpec::threshold(std::exp(min_max_cross - rng.uniform(0.02, 0.3)));
}

} // namespace

ClusteredInstance make_clustered_instance(Rng& rng, bool tight) {
    const std::size_t dim = 3 + rng.uniform_index(4);     // 3..6
    const int n_classes = 2 + static_cast<int>(rng.uniform_index(3)); // 2..4
    const double gamma = rng.uniform(0.5, 1.5);
    const double sigma = tight ? rng.uniform(0.02, 0.12) : rng.uniform(0.2, 0.7);

    std::vector<Vec> centers;
    for (int c = 0; c < n_classes; ++c) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 500) throw InputError("clustered instance: cannot separate centers");
            Vec cand = unit_vector(dim, rng);
            bool ok = true;
            if (tight)
                for (const auto& m : centers)
                    if (dot(cand, m) > 0.3) {
                        ok = false;
                        break;
                    }
            if (ok) {
                centers.push_back(std::move(cand));
                break;
            }
        }
    }

    std::vector<LabeledPoint> points;
    EmbeddingTable table;
    for (int c = 0; c < n_classes; ++c) {
        const std::size_t per_class = 3 + rng.uniform_index(6); // 3..8
        for (std::size_t i = 0; i < per_class; ++i) {
            Vec v(dim);
            for (std::size_t k = 0; k < dim; ++k)
                v[k] = centers[static_cast<std::size_t>(c)][k] + sigma * rng.normal();
            EmbeddingVector emb = normalize(v);
            points.push_back(LabeledPoint{emb.coords, c});
            table.push_back(std::move(emb));
        }
    }

    Vec weights(points.size());
    if (rng.uniform() < 0.5) {
        std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(points.size()));
    } else {
        double total = 0.0;
        for (auto& w : weights) {
            w = rng.uniform(0.5, 1.5);
            total += w;
        }
        for (auto& w : weights) w /= total;
    }
    Population pop(std::move(points), std::move(weights));

    std::vector<Vec> g_rows(pop.size());
    SimilarityParams params{gamma};
    for (std::size_t i = 0; i < pop.size(); ++i)
        g_rows[i] = similarity_row(table[i], table, params);

    ClusteredInstance inst{std::move(pop), std::move(table), {}, {}, HardeningSpec::identity(),
                           params};
    inst.hardening = random_hardening(rng, g_rows, inst.pop);

    for (std::size_t i = 0; i < inst.pop.size(); ++i) {
        const auto& peers = inst.pop.class_members(inst.pop.point(i).label);
        std::size_t src = peers[rng.uniform_index(peers.size())];
        inst.pair_anchors.push_back(i);
        inst.pair_positives.push_back(inst.table[src]);
    }
    return inst;
}

EmbedderInstance make_embedder_instance(Rng& rng, std::size_t max_points) {
    MixtureConfig mix;
    mix.n_classes = 2 + static_cast<int>(rng.uniform_index(4)); // 2..5
    mix.ambient_dim = 3 + rng.uniform_index(6);                 // 3..8
    std::size_t cap = std::max<std::size_t>(2, max_points / static_cast<std::size_t>(mix.n_classes));
    mix.n_per_class = 2 + rng.uniform_index(cap - 1);
    mix.separation = rng.uniform(1.0, 4.0);
    mix.noise_sigma = rng.uniform(0.3, 1.5);
    mix.seed = rng.next_u64();
    Population pop = make_mixture(mix);

    std::vector<std::size_t> widths{mix.ambient_dim, 4 + rng.uniform_index(13),
                                    3 + rng.uniform_index(6)};
    Rng init = rng.derive(rng.next_u64());
    Embedder embedder = Embedder::random_init(widths, init);

    const double gamma = rng.uniform(0.6, 1.5);
    HardeningSpec h;
    double u = rng.uniform();
    if (u < 0.25)
        h = HardeningSpec::identity();
    else if (u < 0.7)
        h = HardeningSpec::exp_tilt(rng.uniform(0.1, 2.0));
    else
        h = HardeningSpec::threshold(rng.uniform(0.3, std::exp(1.0 / gamma)));

    return EmbedderInstance{std::move(pop), std::move(embedder), h, SimilarityParams{gamma}};
}

} // namespace hardcl
