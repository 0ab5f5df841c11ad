#include "hardcl/population.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "hardcl/errors.hpp"
#include "hardcl/format.hpp"
#include "hardcl/numeric.hpp"

namespace hardcl {

Population::Population(std::vector<LabeledPoint> points, Vec base_weights)
    : points_(std::move(points)), base_weights_(std::move(base_weights)) {
    if (points_.empty()) throw InputError("population: no points");
    if (base_weights_.size() != points_.size())
        throw InputError("population: weight count does not match point count");

    const std::size_t dim = points_.front().features.size();
    if (dim == 0) throw InputError("population: empty feature vectors");
    int max_label = 0;
    for (const auto& pt : points_) {
        if (pt.features.size() != dim) throw InputError("population: ragged feature dimensions");
        if (!all_finite(pt.features)) throw InputError("population: non-finite feature");
        if (pt.label < 0) throw InputError("population: negative label");
        max_label = std::max(max_label, pt.label);
    }
    num_classes_ = max_label + 1;

    KahanSum total;
    for (double w : base_weights_) {
        if (!(w >= 0.0)) throw InputError("population: negative or NaN base weight");
        total.add(w);
    }
    if (std::fabs(total.value() - 1.0) > 1e-12)
        throw InputError("population: base weights must sum to 1 within 1e-12");

    members_.resize(static_cast<std::size_t>(num_classes_));
    for (std::size_t i = 0; i < points_.size(); ++i)
        members_[static_cast<std::size_t>(points_[i].label)].push_back(i);

    int present = 0;
    for (const auto& m : members_)
        if (!m.empty()) ++present;
    if (present < 2) throw InputError("population: need at least 2 distinct labels");
}

Population Population::with_uniform_weights(std::vector<LabeledPoint> points) {
    const std::size_t n = points.size();
    if (n == 0) throw InputError("population: no points");
    Vec w(n, 1.0 / static_cast<double>(n));
    return Population(std::move(points), std::move(w));
}

const std::vector<std::size_t>& Population::class_members(int label) const {
    if (label < 0 || label >= num_classes_) throw InputError("population: label out of range");
    return members_[static_cast<std::size_t>(label)];
}

Population Population::load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("population: cannot open " + path);

    std::string line;
    if (!std::getline(is, line)) throw InputError("population: empty file " + path);
    auto header = split(trim(line), ',');
    std::size_t label_col = header.size();
    std::size_t weight_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        auto name = trim(header[i]);
        if (name == "label") label_col = i;
        if (name == "weight") weight_col = i;
    }
    if (label_col == header.size())
        throw InputError("population: header must contain a 'label' column");
    if (label_col == 0) throw InputError("population: no feature columns before 'label'");
    const std::size_t dim = label_col;
    const bool has_weight = weight_col != header.size();

    std::vector<LabeledPoint> points;
    Vec weights;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        auto row = trim(line);
        if (row.empty()) continue;
        auto cells = split(row, ',');
        if (cells.size() != header.size())
            throw InputError("population: row " + std::to_string(lineno) + " has wrong column count");
        LabeledPoint pt;
        pt.features.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) pt.features[i] = parse_double(trim(cells[i]));
        pt.label = static_cast<int>(parse_int(trim(cells[label_col])));
        points.push_back(std::move(pt));
        weights.push_back(has_weight ? parse_double(trim(cells[weight_col])) : 1.0);
    }
    if (points.empty()) throw InputError("population: no data rows in " + path);

    KahanSum total;
    for (double w : weights) {
        if (!(w >= 0.0)) throw InputError("population: negative weight in " + path);
        total.add(w);
    }
    if (!(total.value() > 0.0)) throw InputError("population: zero total weight in " + path);
    for (double& w : weights) w /= total.value();
    return Population(std::move(points), std::move(weights));
}

void Population::save_csv(const std::string& path) const {
    std::ofstream os(path, std::ios::binary); // binary: LF line endings everywhere
    if (!os) throw InputError("population: cannot open " + path + " for writing");
    const std::size_t dim = feature_dim();
    for (std::size_t i = 0; i < dim; ++i) os << 'f' << i << ',';
    os << "label,weight\n";
    for (std::size_t i = 0; i < size(); ++i) {
        for (double x : points_[i].features) os << format_double(x) << ',';
        os << points_[i].label << ',' << format_double(base_weights_[i]) << '\n';
    }
    if (!os) throw InputError("population: write failed for " + path);
}

std::string to_string(Setting s) {
    switch (s) {
    case Setting::Ucl: return "UCL";
    case Setting::Scl: return "SCL";
    case Setting::HUcl: return "H-UCL";
    case Setting::HScl: return "H-SCL";
    case Setting::HCol: return "Hcol";
    }
    return "?";
}

Setting parse_setting(std::string_view name) {
    if (name == "UCL") return Setting::Ucl;
    if (name == "SCL") return Setting::Scl;
    if (name == "H-UCL") return Setting::HUcl;
    if (name == "H-SCL") return Setting::HScl;
    if (name == "Hcol") return Setting::HCol;
    throw InputError("unknown setting '" + std::string(name) + "'");
}

std::string to_string(const NegSamplingSpec& spec) {
    std::string s = to_string(spec.setting);
    if (spec.uses_hardening() && !spec.hardening.is_identity())
        s += "[" + to_string(spec.hardening) + "]";
    return s;
}

Vec tilt(std::span<const double> p, std::span<const double> rho) {
    if (p.size() != rho.size()) throw InputError("tilt: length mismatch");
    if (p.empty()) throw InputError("tilt: empty distribution");
    KahanSum alpha;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(rho[i] >= 0.0)) throw InputError("tilt: rho must be nonnegative");
        alpha.add(rho[i] * p[i]);
    }
    double a = alpha.value();
    if (!std::isfinite(a)) throw NumericalError("tilt: non-finite normalizer");
    if (a <= 0.0) throw ZeroMassError("tilt: zero total mass (alpha = 0)");
    Vec out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = rho[i] * p[i] / a;
    return out;
}

double expected_under(std::span<const double> dist, std::span<const double> values) {
    if (dist.size() != values.size()) throw InputError("expected_under: length mismatch");
    KahanSum acc;
    for (std::size_t i = 0; i < dist.size(); ++i) acc.add(dist[i] * values[i]);
    return acc.value();
}

std::vector<std::size_t> sample_negatives(std::span<const double> dist, std::size_t k,
                                          std::uint64_t seed) {
    if (k == 0) throw InputError("sample_negatives: k must be >= 1");
    AliasTable table(dist);
    Rng rng(seed);
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = table.sample(rng);
    return out;
}

EmbeddingTable embed_population(const Population& pop, const Embedder& f) {
    EmbeddingTable table;
    table.reserve(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) table.push_back(f.forward(pop.point(i).features));
    return table;
}

Vec similarity_row(const EmbeddingVector& anchor, const EmbeddingTable& table, SimilarityParams p) {
    p.validate();
    Vec row(table.size());
    for (std::size_t j = 0; j < table.size(); ++j)
        row[j] = dot(anchor.coords, table[j].coords) / p.gamma;
    return row;
}

AlphaReport compute_alphas(const Population& pop, std::size_t anchor_index, const Embedder& f,
                           const HardeningSpec& h, SimilarityParams p) {
    EmbeddingTable table = embed_population(pop, f);
    Vec g_row = similarity_row(table[anchor_index], table, p);
    return compute_alphas_row(pop, anchor_index, g_row, h);
}

AlphaReport compute_alphas_row(const Population& pop, std::size_t anchor_index,
                               std::span<const double> g_row, const HardeningSpec& h) {
    if (anchor_index >= pop.size()) throw InputError("compute_alphas: anchor index out of range");
    if (g_row.size() != pop.size()) throw InputError("compute_alphas: similarity row size mismatch");
    h.validate();
    const int anchor_label = pop.point(anchor_index).label;
    const Vec& w = pop.base_weights();

    KahanSum scl, hucl, hscl, hcol;
    for (std::size_t j = 0; j < pop.size(); ++j) {
        const bool other = pop.point(j).label != anchor_label;
        const double e = eta(h, g_row[j]);
        const double we = w[j] * e;
        hucl.add(we);
        if (other) {
            scl.add(w[j]);
            hscl.add(we);
        } else {
            hcol.add(we);
        }
    }
    return AlphaReport{scl.value(), hucl.value(), hscl.value(), hcol.value()};
}

namespace {

// Shared weight construction for the conditional distributions. The
// exponential tilt runs in log space (shift by the max exponent) so large
// beta never overflows; the shift cancels after normalization.
Vec setting_weights(const Population& pop, std::size_t anchor_index, const NegSamplingSpec& spec,
                    std::span<const double> g_row) {
    const int anchor_label = pop.point(anchor_index).label;
    const Vec& p = pop.base_weights();
    const std::size_t n = pop.size();

    auto eligible = [&](std::size_t j) {
        switch (spec.setting) {
        case Setting::Ucl:
        case Setting::HUcl: return true;
        case Setting::Scl:
        case Setting::HScl: return pop.point(j).label != anchor_label;
        case Setting::HCol: return pop.point(j).label == anchor_label;
        }
        return false;
    };

    const HardeningSpec h = spec.effective_hardening();
    Vec w(n, 0.0);
    if (h.variant == HardeningSpec::Variant::ExpTilt) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (eligible(j) && p[j] > 0.0) m = std::max(m, log_eta_exp(h, g_row[j]));
        if (std::isinf(m)) return w; // empty support; caller reports
        for (std::size_t j = 0; j < n; ++j)
            if (eligible(j)) w[j] = std::exp(log_eta_exp(h, g_row[j]) - m) * p[j];
    } else {
        for (std::size_t j = 0; j < n; ++j)
            if (eligible(j)) w[j] = eta(h, g_row[j]) * p[j];
    }
    return w;
}

} // namespace

Vec neg_distribution(const Population& pop, std::size_t anchor_index, const NegSamplingSpec& spec,
                     const Embedder& f, SimilarityParams p) {
    EmbeddingTable table = embed_population(pop, f);
    Vec g_row = similarity_row(table[anchor_index], table, p);
    return neg_distribution_row(pop, anchor_index, spec, g_row);
}

Vec neg_distribution_row(const Population& pop, std::size_t anchor_index,
                         const NegSamplingSpec& spec, std::span<const double> g_row) {
    if (anchor_index >= pop.size()) throw InputError("neg_distribution: anchor index out of range");
    if (g_row.size() != pop.size())
        throw InputError("neg_distribution: similarity row size mismatch");

    // no conditioning at all: the base distribution verbatim
    if (spec.setting == Setting::Ucl ||
        (spec.setting == Setting::HUcl && spec.effective_hardening().is_identity()))
        return Vec(pop.base_weights());

    Vec w = setting_weights(pop, anchor_index, spec, g_row);
    KahanSum alpha;
    for (double x : w) alpha.add(x);
    double a = alpha.value();
    if (!std::isfinite(a)) throw NumericalError("neg_distribution: non-finite normalizer");
    if (a <= 0.0)
        throw ZeroMassError("neg_distribution: empty support for " + to_string(spec) +
                            " at anchor " + std::to_string(anchor_index));
    for (double& x : w) x /= a;
    return w;
}

HardSets hard_sets(const Population& pop, std::size_t anchor_index, const Embedder& f, double tau,
                   SimilarityParams p) {
    EmbeddingTable table = embed_population(pop, f);
    Vec g_row = similarity_row(table[anchor_index], table, p);
    return hard_sets_row(pop, anchor_index, g_row, tau);
}

HardSets hard_sets_row(const Population& pop, std::size_t anchor_index,
                       std::span<const double> g_row, double tau) {
    if (!(tau > 0.0)) throw InputError("hard_sets: tau must be > 0");
    if (anchor_index >= pop.size()) throw InputError("hard_sets: anchor index out of range");
    const int anchor_label = pop.point(anchor_index).label;
    HardSets sets;
    for (std::size_t j = 0; j < pop.size(); ++j) {
        const bool other = pop.point(j).label != anchor_label;
        const bool hard = std::exp(g_row[j]) >= tau;
        if (other) sets.scl.push_back(j);
        if (hard) {
            sets.hucl.push_back(j);
            if (other)
                sets.hscl.push_back(j);
            else
                sets.hcol.push_back(j);
        }
    }
    return sets;
}

} // namespace hardcl
