#include "hardcl/theory.hpp"

#include <cmath>
#include <limits>

#include "hardcl/errors.hpp"
#include "hardcl/parallel.hpp"

namespace hardcl {

namespace {

constexpr double kAssumptionSlack = 1e-12;
constexpr double kLossSlack = 1e-9;

double mean_exp_under(const Population& pop, std::size_t anchor, Setting setting,
                      const HardeningSpec& h, std::span<const double> g_row) {
    NegSamplingSpec spec{setting, h};
    Vec dist = neg_distribution_row(pop, anchor, spec, g_row);
    KahanSum acc;
    for (std::size_t j = 0; j < dist.size(); ++j)
        if (dist[j] > 0.0) acc.add(dist[j] * std::exp(g_row[j]));
    return acc.value();
}

} // namespace

AssumptionRecord check_assumption1(const Population& pop, std::size_t anchor_index,
                                   const Embedder& f, const HardeningSpec& h, SimilarityParams p) {
    EmbeddingTable table = embed_population(pop, f);
    Vec g_row = similarity_row(table[anchor_index], table, p);
    return check_assumption1_row(pop, anchor_index, g_row, h);
}

AssumptionRecord check_assumption1_row(const Population& pop, std::size_t anchor_index,
                                       std::span<const double> g_row, const HardeningSpec& h) {
    AssumptionRecord rec;
    rec.anchor_index = anchor_index;
    try {
        rec.e_hcol = mean_exp_under(pop, anchor_index, Setting::HCol, h, g_row);
        rec.e_hscl = mean_exp_under(pop, anchor_index, Setting::HScl, h, g_row);
    } catch (const ZeroMassError&) {
        throw AssumptionUndefined("assumption undefined at anchor " +
                                  std::to_string(anchor_index) +
                                  ": a conditional distribution has zero mass");
    }
    rec.holds = rec.e_hcol >= rec.e_hscl - kAssumptionSlack;
    return rec;
}

AssumptionSummary assumption_summary_table(const Population& pop, const EmbeddingTable& points,
                                           const HardeningSpec& h, SimilarityParams p,
                                           int n_threads) {
    h.validate();
    p.validate();
    if (points.size() != pop.size())
        throw InputError("assumption summary: embedding table size mismatch");
    const std::size_t n = pop.size();
    std::vector<AssumptionRecord> recs(n);
    std::vector<unsigned char> ok(n, 0);
    parallel_for(n, n_threads, [&](std::size_t i) {
        Vec g_row = similarity_row(points[i], points, p);
        try {
            recs[i] = check_assumption1_row(pop, i, g_row, h);
            ok[i] = 1;
        } catch (const AssumptionUndefined&) {
            ok[i] = 0;
        }
    });

    AssumptionSummary out;
    std::size_t holds = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!ok[i]) {
            ++out.undefined;
            continue;
        }
        out.records.push_back(recs[i]);
        ++out.defined;
        if (recs[i].holds) ++holds;
    }
    if (out.defined == 0)
        throw AssumptionUndefined("assumption fraction undefined: no anchor has both "
                                  "conditional distributions nonempty");
    out.fraction = static_cast<double>(holds) / static_cast<double>(out.defined);
    return out;
}

double assumption_fraction(const Population& pop, const Embedder& f, const HardeningSpec& h,
                           SimilarityParams p) {
    EmbeddingTable points = embed_population(pop, f);
    return assumption_summary_table(pop, points, h, p).fraction;
}

LemmaRecord verify_lemma1_table(const Population& pop, const EmbeddingTable& points,
                                const HardeningSpec& h, SimilarityParams p,
                                std::span<const std::size_t> pair_anchors,
                                const EmbeddingTable& pair_positives, int n_threads) {
    LemmaRecord rec;
    rec.assumption_fraction = assumption_summary_table(pop, points, h, p, n_threads).fraction;
    rec.l_hucl = loss_exact_table(pop, NegSamplingSpec{Setting::HUcl, h}, points, pair_anchors,
                                  pair_positives, p, ZeroNegativePolicy::Fatal, n_threads)
                     .report.value;
    rec.l_hscl = loss_exact_table(pop, NegSamplingSpec{Setting::HScl, h}, points, pair_anchors,
                                  pair_positives, p, ZeroNegativePolicy::Fatal, n_threads)
                     .report.value;
    rec.holds = rec.l_hscl <= rec.l_hucl + kLossSlack;
    if (rec.assumption_fraction == 1.0 && !rec.holds)
        throw CheckFailure("lemma violated with assumption fraction 1: l_hscl = " +
                           std::to_string(rec.l_hscl) + " > l_hucl = " + std::to_string(rec.l_hucl));
    return rec;
}

LemmaRecord verify_lemma1(const Population& pop, const Embedder& f, const HardeningSpec& h,
                          SimilarityParams p, const PositivePairing& shared_pairing,
                          int n_threads) {
    EmbeddingTable points = embed_population(pop, f);
    std::vector<std::size_t> anchors;
    EmbeddingTable positives;
    for (const auto& pr : shared_pairing) {
        anchors.push_back(pr.anchor);
        positives.push_back(f.forward(pr.positive_features));
    }
    return verify_lemma1_table(pop, points, h, p, anchors, positives, n_threads);
}

CounterexampleRecord build_counterexample_hardening(const Population& pop,
                                                    std::size_t anchor_index, const Embedder& f,
                                                    SimilarityParams p) {
    EmbeddingTable table = embed_population(pop, f);
    Vec g_row = similarity_row(table[anchor_index], table, p);
    return build_counterexample_row(pop, anchor_index, g_row);
}

CounterexampleRecord build_counterexample_row(const Population& pop, std::size_t anchor_index,
                                              std::span<const double> g_row) {
    if (anchor_index >= pop.size())
        throw InputError("counterexample: anchor index out of range");

    // tau* = E_{UCL}[e^g]
    KahanSum acc;
    const Vec& w = pop.base_weights();
    for (std::size_t j = 0; j < pop.size(); ++j)
        if (w[j] > 0.0) acc.add(w[j] * std::exp(g_row[j]));
    const double tau_star = acc.value();

    CounterexampleRecord rec;
    rec.anchor_index = anchor_index;
    rec.tau_star = tau_star;
    rec.hardening = HardeningSpec::threshold(tau_star);
    try {
        rec.e_hscl = mean_exp_under(pop, anchor_index, Setting::HScl, rec.hardening, g_row);
    } catch (const ZeroMassError&) {
        throw ConstructionInapplicable(
            "counterexample: no differently-labeled sample reaches the threshold at anchor " +
            std::to_string(anchor_index));
    }
    return rec;
}

bool verify_prop2(const Population& pop, const Embedder& f, const HardeningSpec& h,
                  SimilarityParams p) {
    return verify_prop2_table(pop, embed_population(pop, f), h, p);
}

bool verify_prop2_table(const Population& pop, const EmbeddingTable& points,
                        const HardeningSpec& h, SimilarityParams p, int n_threads) {
    h.validate();
    p.validate();
    if (points.size() != pop.size()) throw InputError("prop2: embedding table size mismatch");
    const std::size_t n = pop.size();
    std::vector<unsigned char> ok(n, 0);
    parallel_for(n, n_threads, [&](std::size_t i) {
        Vec g_row = similarity_row(points[i], points, p);
        AlphaReport a = compute_alphas_row(pop, i, g_row, h);
        ok[i] = std::fabs(a.alpha_hucl - (a.alpha_hscl + a.alpha_hcol)) <= 1e-12 ? 1 : 0;
    });
    for (unsigned char v : ok)
        if (!v) return false;
    return true;
}

} // namespace hardcl
