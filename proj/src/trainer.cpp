#include "hardcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>

#include "hardcl/errors.hpp"
#include "hardcl/format.hpp"
#include "hardcl/theory.hpp"

namespace hardcl {

Adam::Adam(const Embedder& e, double learning_rate)
    : lr_(learning_rate), m_(Gradients::zeros_like(e)), v_(Gradients::zeros_like(e)) {
    if (!(lr_ >= 0.0)) throw InputError("adam: learning rate must be >= 0");
}

void Adam::step(Embedder& e, const Gradients& g) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    Gradients step = Gradients::zeros_like(e);
    for (std::size_t l = 0; l < step.weights.size(); ++l) {
        for (std::size_t i = 0; i < step.weights[l].size(); ++i) {
            double gi = g.weights[l][i];
            m_.weights[l][i] = b1 * m_.weights[l][i] + (1.0 - b1) * gi;
            v_.weights[l][i] = b2 * v_.weights[l][i] + (1.0 - b2) * gi * gi;
            step.weights[l][i] =
                -lr_ * (m_.weights[l][i] / c1) / (std::sqrt(v_.weights[l][i] / c2) + eps);
        }
        for (std::size_t i = 0; i < step.biases[l].size(); ++i) {
            double gi = g.biases[l][i];
            m_.biases[l][i] = b1 * m_.biases[l][i] + (1.0 - b1) * gi;
            v_.biases[l][i] = b2 * v_.biases[l][i] + (1.0 - b2) * gi * gi;
            step.biases[l][i] =
                -lr_ * (m_.biases[l][i] / c1) / (std::sqrt(v_.biases[l][i] / c2) + eps);
        }
    }
    e.apply_update(step);
}

void TrainConfig::validate() const {
    if (epochs < 1) throw InputError("train: epochs must be >= 1");
    if (batch_size < 4) throw InputError("train: batch_size must be >= 4");
    if (!(learning_rate >= 0.0)) throw InputError("train: learning_rate must be >= 0");
    if (!(gamma > 0.0)) throw InputError("train: gamma must be > 0");
    if (embed_dim < 2) throw InputError("train: embed_dim must be >= 2");
    if (beta && tau_range)
        throw InputError("train: beta and tau schedule are mutually exclusive");
    // beta = 0 switches hardening off (identity eta)
    if (beta && !(*beta >= 0.0)) throw InputError("train: beta must be >= 0");
    if (!(probe_train_fraction > 0.0 && probe_train_fraction < 1.0))
        throw InputError("train: probe_train_fraction must be in (0,1)");
    if (setting == Setting::HCol) throw InputError("train: Hcol is not a training setting");
    if (tau_range && epochs == 1 && tau_range->first != tau_range->second)
        throw InputError("train: tau schedule is degenerate with a single epoch");
}

double TrainConfig::effective_m() const {
    return m_scale > 0.0 ? m_scale : static_cast<double>(batch_size) - 2.0;
}

HardeningSpec TrainConfig::hardening_at(std::size_t epoch) const {
    if (tau_range)
        return HardeningSpec::threshold(
            tau_schedule_value(tau_range->first, tau_range->second, epoch, epochs, gamma));
    if (beta) return *beta == 0.0 ? HardeningSpec::identity() : HardeningSpec::exp_tilt(*beta);
    return HardeningSpec::exp_tilt(1.0);
}

PositiveMode TrainConfig::positive_mode() const {
    return (setting == Setting::Scl || setting == Setting::HScl) ? PositiveMode::AugmentPlusLabel
                                                                 : PositiveMode::AugmentOnly;
}

double tau_schedule_value(double start, double end, std::size_t epoch, std::size_t n_epochs,
                          double gamma) {
    if (!(gamma > 0.0)) throw InputError("tau schedule: gamma must be > 0");
    if (n_epochs < 1) throw InputError("tau schedule: need at least 1 epoch");
    if (epoch < 1 || epoch > n_epochs) throw InputError("tau schedule: epoch out of range");
    double l;
    if (n_epochs == 1) {
        if (start != end) throw InputError("tau schedule: degenerate with a single epoch");
        l = start;
    } else {
        l = start + (static_cast<double>(epoch - 1) / static_cast<double>(n_epochs - 1)) *
                        (end - start);
    }
    return std::exp(l / gamma);
}

PositivePairing frozen_eval_pairing(const Population& pop, double aug_sigma, Rng& rng) {
    AugmentConfig aug{aug_sigma};
    PositivePairing pairing;
    pairing.reserve(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const auto& peers = pop.class_members(pop.point(i).label);
        std::size_t source = peers.size() < 2 ? i : peers[rng.uniform_index(peers.size())];
        pairing.push_back(PositivePair{i, augment(pop.point(source).features, aug, rng)});
    }
    return pairing;
}

ProbeSplit stratified_split(const Population& pop, double train_fraction, Rng& rng) {
    ProbeSplit split;
    for (int c = 0; c < pop.num_classes(); ++c) {
        std::vector<std::size_t> members = pop.class_members(c);
        if (members.empty()) continue;
        rng.shuffle(members);
        std::size_t n_train = static_cast<std::size_t>(
            std::floor(train_fraction * static_cast<double>(members.size()) + 0.5));
        n_train = std::max<std::size_t>(1, std::min(n_train, members.size()));
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_train ? split.train : split.test).push_back(members[i]);
    }
    if (split.test.empty())
        throw InputError("stratified_split: empty test split; population too small");
    return split;
}

double linear_probe(const EmbeddingTable& train_x, std::span<const int> train_y,
                    const EmbeddingTable& test_x, std::span<const int> test_y) {
    if (train_x.size() != train_y.size() || test_x.size() != test_y.size())
        throw InputError("linear_probe: embedding/label count mismatch");
    if (train_x.empty() || test_x.empty()) throw InputError("linear_probe: empty split");
    const std::size_t d = train_x.front().dim();
    for (const auto& e : test_x)
        if (e.dim() != d) throw InputError("linear_probe: train/test dimension mismatch");

    int max_label = 0;
    for (int y : train_y) max_label = std::max(max_label, y);
    for (int y : test_y) max_label = std::max(max_label, y);
    const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;
    {
        std::vector<char> seen(n_classes, 0);
        for (int y : train_y) seen[static_cast<std::size_t>(y)] = 1;
        if (std::count(seen.begin(), seen.end(), 1) < 2)
            throw InputError("linear_probe: train split needs at least 2 classes");
    }

    const std::size_t n = train_x.size();
    const std::size_t dim1 = d + 1; // affine term
    Vec w(n_classes * dim1, 0.0);
    Vec grad(w.size());
    Vec logits(n_classes);

    constexpr double kStep = 1.5;
    constexpr double kTol = 1e-6;
    constexpr int kMaxIter = 5000;

    auto class_logits = [&](const EmbeddingVector& x, const Vec& params) {
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double* row = params.data() + c * dim1;
            double z = row[d];
            for (std::size_t j = 0; j < d; ++j) z += row[j] * x.coords[j];
            logits[c] = z;
        }
    };

    for (int it = 0; it < kMaxIter; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            class_logits(train_x[i], w);
            double m = *std::max_element(logits.begin(), logits.end());
            double z = 0.0;
            for (std::size_t c = 0; c < n_classes; ++c) {
                logits[c] = std::exp(logits[c] - m);
                z += logits[c];
            }
            for (std::size_t c = 0; c < n_classes; ++c) {
                double p = logits[c] / z;
                double delta = p - (static_cast<int>(c) == train_y[i] ? 1.0 : 0.0);
                double* row = grad.data() + c * dim1;
                for (std::size_t j = 0; j < d; ++j) row[j] += delta * train_x[i].coords[j];
                row[d] += delta;
            }
        }
        double gn = 0.0;
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& gi : grad) {
            gi *= inv_n;
            gn += gi * gi;
        }
        if (std::sqrt(gn) < kTol) break;
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= kStep * grad[j];
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_x.size(); ++i) {
        class_logits(test_x[i], w);
        std::size_t best = 0;
        for (std::size_t c = 1; c < n_classes; ++c)
            if (logits[c] > logits[best]) best = c;
        if (static_cast<int>(best) == test_y[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_x.size());
}

namespace {

constexpr std::uint64_t kSaltInit = 11;
constexpr std::uint64_t kSaltEvalPairs = 23;
constexpr std::uint64_t kSaltSplit = 37;
constexpr std::uint64_t kSaltEpochPipeline = 53;

bool at_cadence(std::size_t epoch, std::size_t every, std::size_t n_epochs) {
    if (epoch == n_epochs) return true;
    return every > 0 && epoch % every == 0;
}

struct TrackedLosses {
    double ucl = 0.0, scl = 0.0, hucl = 0.0, hscl = 0.0;
    double fraction = 0.0;
    std::size_t skipped = 0;
};

TrackedLosses evaluate_tracked(const Population& pop, const Embedder& f,
                               const PositivePairing& pairing, const HardeningSpec& h,
                               SimilarityParams p, int n_threads) {
    EmbeddingTable points = embed_population(pop, f);
    std::vector<std::size_t> anchors;
    EmbeddingTable positives;
    anchors.reserve(pairing.size());
    positives.reserve(pairing.size());
    for (const auto& pr : pairing) {
        anchors.push_back(pr.anchor);
        positives.push_back(f.forward(pr.positive_features));
    }

    auto exact = [&](Setting s, const HardeningSpec& hh) {
        return loss_exact_table(pop, NegSamplingSpec{s, hh}, points, anchors, positives, p,
                                ZeroNegativePolicy::Skip, n_threads);
    };

    TrackedLosses out;
    auto identity = HardeningSpec::identity();
    auto r_ucl = exact(Setting::Ucl, identity);
    auto r_scl = exact(Setting::Scl, identity);
    auto r_hucl = exact(Setting::HUcl, h);
    auto r_hscl = exact(Setting::HScl, h);
    out.ucl = r_ucl.report.value;
    out.scl = r_scl.report.value;
    out.hucl = r_hucl.report.value;
    out.hscl = r_hscl.report.value;
    out.skipped = r_ucl.pairs_skipped + r_scl.pairs_skipped + r_hucl.pairs_skipped +
                  r_hscl.pairs_skipped;
    try {
        out.fraction = assumption_summary_table(pop, points, h, p, n_threads).fraction;
    } catch (const AssumptionUndefined&) {
        out.fraction = std::numeric_limits<double>::quiet_NaN();
    }

    // the inequality the tracked curves must respect whenever the
    // assumption holds at every anchor and nothing was skipped
    if (out.fraction == 1.0 && out.skipped == 0 && out.hscl > out.hucl + 1e-9)
        throw CheckFailure("tracked losses violate the H-UCL >= H-SCL bound: " +
                           std::to_string(out.hscl) + " > " + std::to_string(out.hucl));
    return out;
}

} // namespace

TrainResult train(const Population& pop, const TrainConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> widths;
    widths.push_back(pop.feature_dim());
    for (std::size_t wdt : cfg.hidden_widths) widths.push_back(wdt);
    widths.push_back(cfg.embed_dim);
    Rng init_rng = Rng(cfg.seed).derive(kSaltInit);
    return train(pop, cfg, Embedder::random_init(widths, init_rng));
}

TrainResult train(const Population& pop, const TrainConfig& cfg, Embedder init) {
    cfg.validate();
    if (init.input_dim() != pop.feature_dim())
        throw InputError("train: embedder input width does not match population features");

    const Rng root(cfg.seed);
    SimilarityParams p{cfg.gamma};
    AugmentConfig aug{cfg.aug_sigma};
    const double m_scalar = cfg.effective_m();
    const PositiveMode mode = cfg.positive_mode();

    Rng eval_rng = root.derive(kSaltEvalPairs);
    const PositivePairing eval_pairing = frozen_eval_pairing(pop, cfg.aug_sigma, eval_rng);
    Rng split_rng = root.derive(kSaltSplit);
    const ProbeSplit split = stratified_split(pop, cfg.probe_train_fraction, split_rng);
    std::vector<int> train_labels, test_labels;
    for (std::size_t i : split.train) train_labels.push_back(pop.point(i).label);
    for (std::size_t i : split.test) test_labels.push_back(pop.point(i).label);

    Embedder model = std::move(init);
    Adam opt(model, cfg.learning_rate);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    TrackedLosses tracked;
    tracked.ucl = tracked.scl = tracked.hucl = tracked.hscl = tracked.fraction = nan;
    double probe_acc = nan;

    std::vector<EpochRecord> history;
    history.reserve(cfg.epochs);
    std::size_t warned_skips = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        NegSamplingSpec spec{cfg.setting, cfg.hardening_at(epoch)};

        // The pipeline stream restarts identically every epoch: batches,
        // shuffling and augmentations are a function of the seed alone.
        Rng pipe = root.derive(kSaltEpochPipeline);
        std::vector<std::size_t> order(pop.size());
        std::iota(order.begin(), order.end(), 0);
        pipe.shuffle(order);

        KahanSum loss_sum;
        std::size_t anchors_total = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            if (stop - start < 2) continue;
            Batch batch;
            batch.reserve(stop - start);
            for (std::size_t bi = start; bi < stop; ++bi) {
                const std::size_t idx = order[bi];
                BatchItem item;
                item.anchor_features = pop.point(idx).features;
                item.label = pop.point(idx).label;
                std::size_t source = idx;
                if (mode == PositiveMode::AugmentPlusLabel) {
                    const auto& peers = pop.class_members(item.label);
                    if (peers.size() >= 2) source = peers[pipe.uniform_index(peers.size())];
                }
                item.positive_features = augment(pop.point(source).features, aug, pipe);
                batch.push_back(std::move(item));
            }

            BatchGradResult res;
            try {
                res = batch_loss_gradient(batch, model, spec, m_scalar, p,
                                          ZeroNegativePolicy::Skip);
            } catch (const NumericalError& e) {
                throw NumericalError("train: " + std::string(e.what()) + " at epoch " +
                                     std::to_string(epoch) + ", batch starting " +
                                     std::to_string(start));
            }
            if (res.anchors_skipped > 0 && warned_skips == 0)
                std::clog << "train: skipped " << res.anchors_skipped
                          << " anchor(s) with no eligible in-batch negatives (epoch " << epoch
                          << ")\n";
            warned_skips += res.anchors_skipped;
            loss_sum.add(res.loss * static_cast<double>(res.anchors_used));
            anchors_total += res.anchors_used;
            opt.step(model, res.grads);
        }
        if (anchors_total == 0) throw InputError("train: no usable batches");

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum.value() / static_cast<double>(anchors_total);
        if (!std::isfinite(rec.train_loss))
            throw NumericalError("train: non-finite epoch loss at epoch " + std::to_string(epoch));

        if (at_cadence(epoch, cfg.losses_every, cfg.epochs))
            tracked = evaluate_tracked(pop, model, eval_pairing, cfg.hardening_at(epoch), p,
                                       cfg.n_threads);
        rec.loss_ucl = tracked.ucl;
        rec.loss_scl = tracked.scl;
        rec.loss_hucl = tracked.hucl;
        rec.loss_hscl = tracked.hscl;
        rec.assumption_fraction = tracked.fraction;

        if (at_cadence(epoch, cfg.probe_every, cfg.epochs)) {
            EmbeddingTable points = embed_population(pop, model);
            EmbeddingTable train_x, test_x;
            for (std::size_t i : split.train) train_x.push_back(points[i]);
            for (std::size_t i : split.test) test_x.push_back(points[i]);
            probe_acc = linear_probe(train_x, train_labels, test_x, test_labels);
        }
        rec.probe_accuracy = probe_acc;
        history.push_back(rec);
    }

    return TrainResult{std::move(history), std::move(model)};
}

std::vector<ComparisonRow> run_method_comparison(const Population& pop, const TrainConfig& base,
                                                 std::span<const Setting> settings,
                                                 std::span<const std::uint64_t> seeds) {
    if (settings.empty()) throw InputError("comparison: need at least one setting");
    if (seeds.empty()) throw InputError("comparison: need at least one seed");

    std::vector<ComparisonRow> rows;
    for (Setting s : settings) {
        Vec finals;
        for (std::uint64_t seed : seeds) {
            TrainConfig cfg = base;
            cfg.setting = s;
            cfg.seed = seed;
            TrainResult res = train(pop, cfg);
            finals.push_back(res.history.back().probe_accuracy);
        }
        ComparisonRow row;
        TrainConfig named = base;
        named.setting = s;
        row.setting = to_string(NegSamplingSpec{s, named.hardening_at(base.epochs)});
        row.n_seeds = finals.size();
        double mean = kahan_sum(finals) / static_cast<double>(finals.size());
        double var = 0.0;
        if (finals.size() > 1) {
            KahanSum sq;
            for (double v : finals) sq.add((v - mean) * (v - mean));
            var = sq.value() / static_cast<double>(finals.size() - 1);
        }
        row.mean_acc = mean;
        row.std_acc = std::sqrt(var);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_history_csv(const std::string& path, std::span<const EpochRecord> history) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("history: cannot open " + path + " for writing");
    os << "epoch,train_loss,loss_ucl,loss_scl,loss_hucl,loss_hscl,assumption_fraction,"
          "probe_accuracy\n";
    for (const auto& r : history) {
        os << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.loss_ucl)
           << ',' << format_double(r.loss_scl) << ',' << format_double(r.loss_hucl) << ','
           << format_double(r.loss_hscl) << ',' << format_double(r.assumption_fraction) << ','
           << format_double(r.probe_accuracy) << '\n';
    }
    if (!os) throw InputError("history: write failed for " + path);
}

void write_comparison_csv(const std::string& path, std::span<const ComparisonRow> rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("comparison: cannot open " + path + " for writing");
    os << "setting,mean_acc,std_acc,n_seeds\n";
    for (const auto& r : rows)
        os << r.setting << ',' << format_double(r.mean_acc) << ',' << format_double(r.std_acc)
           << ',' << r.n_seeds << '\n';
    if (!os) throw InputError("comparison: write failed for " + path);
}

} // namespace hardcl
