#include "hardcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include "hardcl/errors.hpp"
#include "hardcl/format.hpp"
#include "hardcl/parallel.hpp"

namespace hardcl {

void write_loss_reports_csv(const std::string& path, std::span<const LossReport> reports) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("loss report: cannot open " + path + " for writing");
    os << "setting,k,value,stderr,n_anchor_draws,seed\n";
    for (const auto& r : reports) {
        os << to_string(r.spec) << ',';
        if (r.k)
            os << *r.k;
        else
            os << "inf";
        os << ',' << format_double(r.value) << ',' << format_double(r.stderr_) << ','
           << r.n_anchor_draws << ',' << r.seed << '\n';
    }
    if (!os) throw InputError("loss report: write failed for " + path);
}

double psi_k(double g_pos, std::span<const double> g_negs) {
    if (g_negs.empty()) throw InputError("psi_k: need at least one negative");
    KahanSum acc;
    for (double g : g_negs) acc.add(std::exp(g));
    double mean = acc.value() / static_cast<double>(g_negs.size());
    return std::log1p(std::exp(-g_pos) * mean);
}

double psi_inf(double g_pos, double mean_exp_neg) {
    if (!(mean_exp_neg > 0.0) || !std::isfinite(mean_exp_neg))
        throw InputError("psi_inf: mean_exp_neg must be positive and finite");
    return std::log1p(std::exp(-g_pos) * mean_exp_neg);
}

namespace {

// E_{q_spec}[e^g] at one anchor, or nullopt when the setting has empty
// support there.
std::optional<double> mean_exp_neg_at(const Population& pop, std::size_t anchor,
                                      const NegSamplingSpec& spec, std::span<const double> g_row) {
    Vec dist;
    try {
        dist = neg_distribution_row(pop, anchor, spec, g_row);
    } catch (const ZeroMassError&) {
        return std::nullopt;
    }
    KahanSum acc;
    for (std::size_t j = 0; j < dist.size(); ++j)
        if (dist[j] > 0.0) acc.add(dist[j] * std::exp(g_row[j]));
    return acc.value();
}

} // namespace

ExactLossResult loss_exact_table(const Population& pop, const NegSamplingSpec& spec,
                                 const EmbeddingTable& points,
                                 std::span<const std::size_t> pair_anchors,
                                 const EmbeddingTable& pair_positives, SimilarityParams p,
                                 ZeroNegativePolicy policy, int n_threads) {
    p.validate();
    if (points.size() != pop.size()) throw InputError("loss_exact: embedding table size mismatch");
    if (pair_anchors.size() != pair_positives.size() || pair_anchors.empty())
        throw InputError("loss_exact: empty or ragged positive pairing");
    for (std::size_t a : pair_anchors)
        if (a >= pop.size()) throw InputError("loss_exact: pairing anchor out of range");

    const std::size_t n_pairs = pair_anchors.size();
    Vec psi(n_pairs, std::numeric_limits<double>::quiet_NaN());
    std::vector<unsigned char> defined(n_pairs, 0);

    parallel_for(n_pairs, n_threads, [&](std::size_t i) {
        const std::size_t a = pair_anchors[i];
        Vec g_row = similarity_row(points[a], points, p);
        auto mean = mean_exp_neg_at(pop, a, spec, g_row);
        if (!mean) return;
        double g_pos = similarity(points[a], pair_positives[i], p);
        psi[i] = psi_inf(g_pos, *mean);
        defined[i] = 1;
    });

    KahanSum acc;
    std::size_t used = 0, skipped = 0;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        if (defined[i]) {
            acc.add(psi[i]);
            ++used;
        } else {
            if (policy == ZeroNegativePolicy::Fatal)
                throw ZeroMassError("loss_exact: empty support for " + to_string(spec) +
                                    " at anchor " + std::to_string(pair_anchors[i]));
            ++skipped;
        }
    }
    if (used == 0)
        throw ZeroMassError("loss_exact: no pair has nonempty support for " + to_string(spec));

    LossReport report;
    report.spec = spec;
    report.value = acc.value() / static_cast<double>(used);
    report.stderr_ = 0.0;
    report.k = std::nullopt;
    report.n_anchor_draws = used;
    return {report, skipped};
}

LossReport loss_exact(const Population& pop, const NegSamplingSpec& spec, const Embedder& f,
                      SimilarityParams p, const PositivePairing& pairing, int n_threads) {
    EmbeddingTable points = embed_population(pop, f);
    std::vector<std::size_t> anchors;
    EmbeddingTable positives;
    anchors.reserve(pairing.size());
    positives.reserve(pairing.size());
    for (const auto& pr : pairing) {
        anchors.push_back(pr.anchor);
        positives.push_back(f.forward(pr.positive_features));
    }
    return loss_exact_table(pop, spec, points, anchors, positives, p, ZeroNegativePolicy::Fatal,
                            n_threads)
        .report;
}

LossReport loss_mc(const Population& pop, const NegSamplingSpec& spec, const Embedder& f,
                   SimilarityParams p, const PositivePairing& pairing, std::size_t k,
                   std::size_t n_anchor_draws, std::uint64_t seed) {
    p.validate();
    if (k == 0) throw InputError("loss_mc: k must be >= 1");
    if (n_anchor_draws < 2) throw InputError("loss_mc: need at least 2 anchor draws");
    if (pairing.empty()) throw InputError("loss_mc: empty positive pairing");

    EmbeddingTable points = embed_population(pop, f);

    // per-pair positive similarity, per-anchor sampler and cached e^g
    struct AnchorCache {
        AliasTable table;
        Vec exp_g;
    };
    std::vector<std::optional<AnchorCache>> cache(pop.size());
    Vec g_pos(pairing.size());
    for (std::size_t i = 0; i < pairing.size(); ++i) {
        const auto& pr = pairing[i];
        if (pr.anchor >= pop.size()) throw InputError("loss_mc: pairing anchor out of range");
        g_pos[i] = similarity(points[pr.anchor], f.forward(pr.positive_features), p);
        if (!cache[pr.anchor]) {
            Vec g_row = similarity_row(points[pr.anchor], points, p);
            Vec dist = neg_distribution_row(pop, pr.anchor, spec, g_row);
            Vec eg(pop.size());
            for (std::size_t j = 0; j < pop.size(); ++j) eg[j] = std::exp(g_row[j]);
            cache[pr.anchor].emplace(AnchorCache{AliasTable(dist), std::move(eg)});
        }
    }

    Rng rng(seed);
    KahanSum sum, sumsq;
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t t = 0; t < n_anchor_draws; ++t) {
        std::size_t pair_idx = rng.uniform_index(pairing.size());
        const auto& c = *cache[pairing[pair_idx].anchor];
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += c.exp_g[c.table.sample(rng)];
        double v = std::log1p(std::exp(-g_pos[pair_idx]) * acc * inv_k);
        sum.add(v);
        sumsq.add(v * v);
    }
    const double n = static_cast<double>(n_anchor_draws);
    const double mean = sum.value() / n;
    double var = std::max(0.0, (sumsq.value() - n * mean * mean) / (n - 1.0));

    LossReport report;
    report.spec = spec;
    report.value = mean;
    report.stderr_ = std::sqrt(var / n);
    report.k = k;
    report.n_anchor_draws = n_anchor_draws;
    report.seed = seed;
    return report;
}

namespace {

struct BatchView {
    // embeddings of the 2B views: anchors first, positives after
    std::vector<Embedder::Tape> tapes;
    EmbeddingTable emb;
    std::size_t b = 0;
};

BatchView embed_batch(const Batch& batch, const Embedder& f, bool keep_tapes) {
    if (batch.size() < 2) throw InputError("batch loss: need at least 2 batch elements");
    BatchView v;
    v.b = batch.size();
    v.emb.reserve(2 * v.b);
    if (keep_tapes) v.tapes.resize(2 * v.b);
    Embedder::Tape scratch;
    for (std::size_t i = 0; i < v.b; ++i)
        v.emb.push_back(f.forward(batch[i].anchor_features, keep_tapes ? v.tapes[i] : scratch));
    for (std::size_t i = 0; i < v.b; ++i)
        v.emb.push_back(
            f.forward(batch[i].positive_features, keep_tapes ? v.tapes[v.b + i] : scratch));
    return v;
}

struct AnchorTerm {
    double psi = 0.0;
    bool used = false;
    // pieces reused by the gradient pass
    double g_pos = 0.0;
    double s = 0.0;        // self-normalized weighted mean of e^g
    double sum_w = 0.0;    // sum of weights (after the log-space shift)
    double factor = 0.0;   // M e^{-g+} / (1 + M e^{-g+} S)
    Vec g;                 // g to every view (unused slots NaN)
    Vec w;                 // weight per view (0 for ineligible)
};

AnchorTerm anchor_term(const Batch& batch, const BatchView& view, std::size_t i,
                       const NegSamplingSpec& spec, double M, SimilarityParams p) {
    const std::size_t b = view.b;
    const HardeningSpec h = spec.effective_hardening();
    const bool label_filter = spec.setting == Setting::Scl || spec.setting == Setting::HScl;
    const double beta = h.variant == HardeningSpec::Variant::ExpTilt ? h.beta : 0.0;

    AnchorTerm t;
    t.g.assign(2 * b, std::numeric_limits<double>::quiet_NaN());
    t.w.assign(2 * b, 0.0);

    t.g_pos = similarity(view.emb[i], view.emb[b + i], p);

    double max_bg = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < 2 * b; ++j) {
        if (j == i || j == b + i) continue;
        if (label_filter && batch[j % b].label == batch[i].label) continue;
        t.g[j] = similarity(view.emb[i], view.emb[j], p);
        if (h.variant == HardeningSpec::Variant::ExpTilt)
            max_bg = std::max(max_bg, beta * t.g[j]);
    }

    KahanSum sw, swe;
    for (std::size_t j = 0; j < 2 * b; ++j) {
        if (std::isnan(t.g[j])) continue;
        double w;
        if (h.variant == HardeningSpec::Variant::ExpTilt)
            w = std::exp(beta * t.g[j] - max_bg);
        else
            w = eta(h, t.g[j]);
        t.w[j] = w;
        sw.add(w);
        swe.add(w * std::exp(t.g[j]));
    }
    t.sum_w = sw.value();
    if (!(t.sum_w > 0.0)) return t; // no eligible negatives; caller applies policy

    t.s = swe.value() / t.sum_w;
    const double me = M * std::exp(-t.g_pos);
    t.psi = std::log1p(me * t.s);
    t.factor = me / (1.0 + me * t.s);
    t.used = true;
    return t;
}

void validate_batch_spec(const NegSamplingSpec& spec, double M, SimilarityParams p) {
    p.validate();
    spec.effective_hardening().validate();
    if (spec.setting == Setting::HCol)
        throw InputError("batch loss: Hcol is not a training setting");
    if (!(M > 0.0) || !std::isfinite(M)) throw InputError("batch loss: M must be positive");
}

} // namespace

BatchLossResult batch_loss_eq1(const Batch& batch, const Embedder& f, const NegSamplingSpec& spec,
                               double M, SimilarityParams p, ZeroNegativePolicy policy) {
    validate_batch_spec(spec, M, p);
    BatchView view = embed_batch(batch, f, false);

    KahanSum acc;
    std::size_t used = 0, skipped = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        AnchorTerm t = anchor_term(batch, view, i, spec, M, p);
        if (!t.used) {
            if (policy == ZeroNegativePolicy::Fatal)
                throw ZeroMassError("batch loss: anchor " + std::to_string(i) +
                                    " has no eligible negatives for " + to_string(spec));
            ++skipped;
            continue;
        }
        acc.add(t.psi);
        ++used;
    }
    if (used == 0)
        throw ZeroMassError("batch loss: no anchor has eligible negatives for " + to_string(spec));
    double loss = acc.value() / static_cast<double>(used);
    if (!std::isfinite(loss)) throw NumericalError("batch loss: non-finite value");
    return {loss, used, skipped};
}

BatchGradResult batch_loss_gradient(const Batch& batch, const Embedder& f,
                                    const NegSamplingSpec& spec, double M, SimilarityParams p,
                                    ZeroNegativePolicy policy) {
    validate_batch_spec(spec, M, p);
    BatchView view = embed_batch(batch, f, true);
    const std::size_t b = batch.size();
    const std::size_t d = f.output_dim();
    const double beta = eta_derivative_factor(spec.effective_hardening());

    std::vector<AnchorTerm> terms;
    terms.reserve(b);
    std::size_t used = 0, skipped = 0;
    for (std::size_t i = 0; i < b; ++i) {
        terms.push_back(anchor_term(batch, view, i, spec, M, p));
        if (terms.back().used)
            ++used;
        else if (policy == ZeroNegativePolicy::Fatal)
            throw ZeroMassError("batch loss: anchor " + std::to_string(i) +
                                " has no eligible negatives for " + to_string(spec));
        else
            ++skipped;
    }
    if (used == 0)
        throw ZeroMassError("batch loss: no anchor has eligible negatives for " + to_string(spec));
    const double inv_used = 1.0 / static_cast<double>(used);

    // d(loss)/d(embedding) for all 2B views
    std::vector<Vec> demb(2 * b, Vec(d, 0.0));
    KahanSum acc;
    for (std::size_t i = 0; i < b; ++i) {
        const AnchorTerm& t = terms[i];
        if (!t.used) continue;
        acc.add(t.psi);

        auto add_scaled = [&](std::size_t view_idx, const Vec& src, double scale) {
            Vec& dst = demb[view_idx];
            for (std::size_t c = 0; c < d; ++c) dst[c] += scale * src[c];
        };

        // positive-pair term: d(psi)/d(g+) = -factor * S
        const double dpos = -t.factor * t.s * inv_used / p.gamma;
        add_scaled(i, view.emb[b + i].coords, dpos);
        add_scaled(b + i, view.emb[i].coords, dpos);

        // negative terms: d(psi)/d(g_j) through e^g and the tilt weights
        for (std::size_t j = 0; j < 2 * b; ++j) {
            if (!(t.w[j] > 0.0)) continue;
            double ds_dg = t.w[j] * ((1.0 + beta) * std::exp(t.g[j]) - beta * t.s) / t.sum_w;
            double dneg = t.factor * ds_dg * inv_used / p.gamma;
            add_scaled(i, view.emb[j].coords, dneg);
            add_scaled(j, view.emb[i].coords, dneg);
        }
    }

    BatchGradResult out;
    out.loss = acc.value() * inv_used;
    if (!std::isfinite(out.loss)) throw NumericalError("batch loss: non-finite value");
    out.grads = Gradients::zeros_like(f);
    for (std::size_t v = 0; v < 2 * b; ++v) f.backward(view.tapes[v], demb[v], out.grads);
    out.anchors_used = used;
    out.anchors_skipped = skipped;
    return out;
}

} // namespace hardcl
