#include "hardcl/synth.hpp"

#include <cmath>
#include <iostream>

#include "hardcl/errors.hpp"

namespace hardcl {

void MixtureConfig::validate() const {
    if (n_classes < 2) throw InputError("mixture: need at least 2 classes");
    if (ambient_dim < 2) throw InputError("mixture: ambient_dim must be >= 2");
    if (n_per_class < 2) throw InputError("mixture: n_per_class must be >= 2");
    if (!(separation > 0.0)) throw InputError("mixture: separation must be > 0");
    if (!(noise_sigma >= 0.0)) throw InputError("mixture: noise_sigma must be >= 0");
}

void AugmentConfig::validate() const {
    if (!(aug_sigma >= 0.0)) throw InputError("augment: aug_sigma must be >= 0");
}

namespace {

Vec sphere_point(std::size_t dim, double radius, Rng& rng) {
    Vec v(dim);
    double n = 0.0;
    do {
        for (auto& x : v) x = rng.normal();
        n = norm2(v);
    } while (n < 1e-12);
    for (auto& x : v) x *= radius / n;
    return v;
}

double dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

} // namespace

Population make_mixture(const MixtureConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    constexpr int kMaxAttempts = 10000;
    std::vector<Vec> means;
    means.reserve(static_cast<std::size_t>(cfg.n_classes));
    for (int c = 0; c < cfg.n_classes; ++c) {
        int attempts = 0;
        while (true) {
            if (++attempts > kMaxAttempts)
                throw InputError("mixture: could not place class means pairwise at least "
                                 "`separation` apart; lower separation or raise ambient_dim");
            Vec candidate = sphere_point(cfg.ambient_dim, cfg.separation, rng);
            bool ok = true;
            for (const auto& m : means)
                if (dist(candidate, m) < cfg.separation) {
                    ok = false;
                    break;
                }
            if (ok) {
                means.push_back(std::move(candidate));
                break;
            }
        }
    }

    std::vector<LabeledPoint> points;
    points.reserve(static_cast<std::size_t>(cfg.n_classes) * cfg.n_per_class);
    for (int c = 0; c < cfg.n_classes; ++c) {
        for (std::size_t i = 0; i < cfg.n_per_class; ++i) {
            LabeledPoint pt;
            pt.label = c;
            pt.features.resize(cfg.ambient_dim);
            for (std::size_t k = 0; k < cfg.ambient_dim; ++k)
                pt.features[k] = means[static_cast<std::size_t>(c)][k] +
                                 cfg.noise_sigma * rng.normal();
            points.push_back(std::move(pt));
        }
    }
    return Population::with_uniform_weights(std::move(points));
}

Vec augment(std::span<const double> x, const AugmentConfig& a, Rng& rng) {
    a.validate();
    if (!all_finite(x)) throw InputError("augment: non-finite input");
    Vec out(x.begin(), x.end());
    if (a.aug_sigma == 0.0) return out;
    for (auto& v : out) v += a.aug_sigma * rng.normal();
    return out;
}

DrawnPair draw_positive_pair(const Population& pop, PositiveMode mode, const AugmentConfig& a,
                             Rng& rng) {
    a.validate();
    // anchor ~ base weights; uniform base short-circuits to an index draw
    std::size_t anchor = 0;
    const Vec& w = pop.base_weights();
    bool uniform = true;
    for (double x : w)
        if (x != w[0]) {
            uniform = false;
            break;
        }
    if (uniform) {
        anchor = rng.uniform_index(pop.size());
    } else {
        AliasTable table(w);
        anchor = table.sample(rng);
    }

    std::size_t source = anchor;
    if (mode == PositiveMode::AugmentPlusLabel) {
        const auto& peers = pop.class_members(pop.point(anchor).label);
        if (peers.size() < 2) {
            std::clog << "draw_positive_pair: singleton class " << pop.point(anchor).label
                      << ", falling back to self-augmentation\n";
        } else {
            source = peers[rng.uniform_index(peers.size())];
        }
    }
    return DrawnPair{anchor, augment(pop.point(source).features, a, rng)};
}

} // namespace hardcl
