#ifndef HARDCL_LOSSES_HPP
#define HARDCL_LOSSES_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hardcl/population.hpp"

namespace hardcl {

// One loss measurement. stderr is 0 for exact enumeration; k is empty
// for the infinite-negatives limit.
struct LossReport {
    NegSamplingSpec spec;
    double value = 0.0;
    double stderr_ = 0.0;
    std::optional<std::size_t> k;
    std::size_t n_anchor_draws = 0;
    std::uint64_t seed = 0;
};

void write_loss_reports_csv(const std::string& path, std::span<const LossReport> reports);

// log(1 + e^{-g_pos} * (1/k) sum_j e^{g_neg_j})
double psi_k(double g_pos, std::span<const double> g_negs);

// log(1 + e^{-g_pos} * mean_exp_neg), the k -> infinity limit
double psi_inf(double g_pos, double mean_exp_neg);

// Deterministic positive pairing for exact losses: the empirical
// expectation over these pairs realizes the positive-pair distribution.
struct PositivePair {
    std::size_t anchor = 0;
    Vec positive_features;
};
using PositivePairing = std::vector<PositivePair>;

enum class ZeroNegativePolicy { Fatal, Skip };

struct ExactLossResult {
    LossReport report;
    std::size_t pairs_skipped = 0;
};

// Exact infinite-k population loss by full enumeration: mean over pairs
// of psi_inf with the inner expectation taken under the setting's
// negative distribution. Positives are pre-embedded in the table form.
ExactLossResult loss_exact_table(const Population& pop, const NegSamplingSpec& spec,
                                 const EmbeddingTable& points,
                                 std::span<const std::size_t> pair_anchors,
                                 const EmbeddingTable& pair_positives, SimilarityParams p,
                                 ZeroNegativePolicy policy, int n_threads = 1);

LossReport loss_exact(const Population& pop, const NegSamplingSpec& spec, const Embedder& f,
                      SimilarityParams p, const PositivePairing& pairing, int n_threads = 1);

// Monte Carlo estimate of the finite-k loss: n_anchor_draws pairs drawn
// uniformly from the pairing, k iid negatives per draw.
LossReport loss_mc(const Population& pop, const NegSamplingSpec& spec, const Embedder& f,
                   SimilarityParams p, const PositivePairing& pairing, std::size_t k,
                   std::size_t n_anchor_draws, std::uint64_t seed);

// One anchor/positive pair plus the anchor's label; negatives come from
// the rest of the batch (all other elements and their positive views).
struct BatchItem {
    Vec anchor_features;
    int label = 0;
    Vec positive_features;
};
using Batch = std::vector<BatchItem>;

struct BatchLossResult {
    double loss = 0.0;
    std::size_t anchors_used = 0;
    std::size_t anchors_skipped = 0;
};

// In-batch estimate of the infinite-k loss, log(1 + M e^{-g+} S) averaged
// over anchors, where S is the self-normalized eta-weighted mean of
// e^{g-} over eligible in-batch negatives.
BatchLossResult batch_loss_eq1(const Batch& batch, const Embedder& f, const NegSamplingSpec& spec,
                               double M, SimilarityParams p,
                               ZeroNegativePolicy policy = ZeroNegativePolicy::Fatal);

struct BatchGradResult {
    double loss = 0.0;
    Gradients grads;
    std::size_t anchors_used = 0;
    std::size_t anchors_skipped = 0;
};

// Same loss plus d(loss)/d(parameters), backpropagated through the
// similarity kernel, the eta weights (for the exponential tilt) and the
// sphere projection.
BatchGradResult batch_loss_gradient(const Batch& batch, const Embedder& f,
                                    const NegSamplingSpec& spec, double M, SimilarityParams p,
                                    ZeroNegativePolicy policy = ZeroNegativePolicy::Fatal);

} // namespace hardcl

#endif
