#ifndef HARDCL_INSTANCES_HPP
#define HARDCL_INSTANCES_HPP

#include "hardcl/population.hpp"
#include "hardcl/rng.hpp"

namespace hardcl {

// Randomized instances for the verification suites. A clustered instance
// fixes the embeddings directly (the losses and distributions depend on
// the representation function only through them) together with a shared
// same-class positive pairing.
struct ClusteredInstance {
    Population pop;
    EmbeddingTable table;
    std::vector<std::size_t> pair_anchors;
    EmbeddingTable pair_positives;
    HardeningSpec hardening;
    SimilarityParams params;
};

// tight = true: well-separated tight clusters (the regime where the
// similarity-gap assumption holds at every anchor). tight = false:
// overlapping clusters, used where cross-class similarities must reach
// above the population mean.
ClusteredInstance make_clustered_instance(Rng& rng, bool tight);

// A random mixture population with a randomly initialized embedder, for
// checks that hold for every representation function.
struct EmbedderInstance {
    Population pop;
    Embedder embedder;
    HardeningSpec hardening;
    SimilarityParams params;
};

EmbedderInstance make_embedder_instance(Rng& rng, std::size_t max_points);

} // namespace hardcl

#endif
