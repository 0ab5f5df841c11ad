#ifndef HARDCL_SYNTH_HPP
#define HARDCL_SYNTH_HPP

#include <cstdint>

#include "hardcl/population.hpp"
#include "hardcl/rng.hpp"

namespace hardcl {

// Spherical Gaussian mixture: class means on a sphere of radius
// `separation`, rejection-checked so means stay pairwise at least
// `separation` apart.
struct MixtureConfig {
    int n_classes = 10;
    std::size_t ambient_dim = 16;
    std::size_t n_per_class = 100;
    double separation = 4.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
};

Population make_mixture(const MixtureConfig& cfg);

struct AugmentConfig {
    double aug_sigma = 0.5;
    void validate() const;
};

// x + N(0, aug_sigma^2 I); the identity when aug_sigma = 0.
Vec augment(std::span<const double> x, const AugmentConfig& a, Rng& rng);

enum class PositiveMode { AugmentOnly, AugmentPlusLabel };

struct DrawnPair {
    std::size_t anchor = 0;
    Vec positive;
};

// Anchor drawn from the base weights. AugmentOnly: positive is the
// anchor's own augmentation. AugmentPlusLabel: positive is an
// augmentation of a uniformly drawn same-class point (possibly the
// anchor itself).
DrawnPair draw_positive_pair(const Population& pop, PositiveMode mode, const AugmentConfig& a,
                             Rng& rng);

} // namespace hardcl

#endif
