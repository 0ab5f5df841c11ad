#ifndef HARDCL_THEORY_HPP
#define HARDCL_THEORY_HPP

#include <span>
#include <vector>

#include "hardcl/losses.hpp"
#include "hardcl/population.hpp"

namespace hardcl {

// Both sides of the similarity-gap assumption at one anchor:
// E_{Hcol}[e^g] >= E_{H-SCL}[e^g].
struct AssumptionRecord {
    std::size_t anchor_index = 0;
    double e_hcol = 0.0;
    double e_hscl = 0.0;
    bool holds = false;
};

AssumptionRecord check_assumption1(const Population& pop, std::size_t anchor_index,
                                   const Embedder& f, const HardeningSpec& h, SimilarityParams p);
AssumptionRecord check_assumption1_row(const Population& pop, std::size_t anchor_index,
                                       std::span<const double> g_row, const HardeningSpec& h);

struct AssumptionSummary {
    double fraction = 0.0; // defined anchors where the assumption holds
    std::size_t defined = 0;
    std::size_t undefined = 0;
    std::vector<AssumptionRecord> records; // defined anchors only
};

AssumptionSummary assumption_summary_table(const Population& pop, const EmbeddingTable& points,
                                           const HardeningSpec& h, SimilarityParams p,
                                           int n_threads = 1);
double assumption_fraction(const Population& pop, const Embedder& f, const HardeningSpec& h,
                           SimilarityParams p);

// Exact H-UCL and H-SCL losses under a shared positive pairing plus the
// fraction of anchors satisfying the assumption. When the fraction is 1
// the inequality l_hscl <= l_hucl is required to hold.
struct LemmaRecord {
    double l_hucl = 0.0;
    double l_hscl = 0.0;
    double assumption_fraction = 0.0;
    bool holds = false;
};

LemmaRecord verify_lemma1(const Population& pop, const Embedder& f, const HardeningSpec& h,
                          SimilarityParams p, const PositivePairing& shared_pairing,
                          int n_threads = 1);
LemmaRecord verify_lemma1_table(const Population& pop, const EmbeddingTable& points,
                                const HardeningSpec& h, SimilarityParams p,
                                std::span<const std::size_t> pair_anchors,
                                const EmbeddingTable& pair_positives, int n_threads = 1);

// Threshold hardening with tau* = E_{UCL}[e^g] at the anchor. Under it
// every hard negative satisfies e^g >= tau*, so E_{H-SCL}[e^g] >= tau*
// and psi_inf(H-SCL) >= psi_inf(UCL) for any shared positive.
struct CounterexampleRecord {
    std::size_t anchor_index = 0;
    double tau_star = 0.0;  // = E_{UCL}[e^g]
    double e_hscl = 0.0;    // E_{H-SCL}[e^g] under the constructed threshold
    HardeningSpec hardening;
};

CounterexampleRecord build_counterexample_hardening(const Population& pop,
                                                    std::size_t anchor_index, const Embedder& f,
                                                    SimilarityParams p);
CounterexampleRecord build_counterexample_row(const Population& pop, std::size_t anchor_index,
                                              std::span<const double> g_row);

// True iff alpha_hucl = alpha_hscl + alpha_hcol within 1e-12 at every
// anchor.
bool verify_prop2(const Population& pop, const Embedder& f, const HardeningSpec& h,
                  SimilarityParams p);
bool verify_prop2_table(const Population& pop, const EmbeddingTable& points,
                        const HardeningSpec& h, SimilarityParams p, int n_threads = 1);

} // namespace hardcl

#endif
