#ifndef HARDCL_POPULATION_HPP
#define HARDCL_POPULATION_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hardcl/embedder.hpp"
#include "hardcl/geometry.hpp"
#include "hardcl/hardening.hpp"

namespace hardcl {

struct LabeledPoint {
    Vec features;
    int label = 0;
};

// Finite labeled sample space with an explicit base negative-sampling
// distribution. Immutable after construction; all operations are
// read-only.
class Population {
public:
    Population(std::vector<LabeledPoint> points, Vec base_weights);
    static Population with_uniform_weights(std::vector<LabeledPoint> points);

    std::size_t size() const { return points_.size(); }
    const LabeledPoint& point(std::size_t i) const { return points_[i]; }
    const std::vector<LabeledPoint>& points() const { return points_; }
    const Vec& base_weights() const { return base_weights_; }
    int num_classes() const { return num_classes_; }
    std::size_t feature_dim() const { return points_.front().features.size(); }
    const std::vector<std::size_t>& class_members(int label) const;

    // CSV: header row f0..f{D-1},label[,weight]; weights default uniform
    // and are renormalized on load.
    static Population load_csv(const std::string& path);
    void save_csv(const std::string& path) const;

private:
    std::vector<LabeledPoint> points_;
    Vec base_weights_;
    int num_classes_ = 0;
    std::vector<std::vector<std::size_t>> members_;
};

// Negative-sampling settings. UCL and SCL ignore the hardening spec.
enum class Setting { Ucl, Scl, HUcl, HScl, HCol };

std::string to_string(Setting s);
Setting parse_setting(std::string_view name);

struct NegSamplingSpec {
    Setting setting = Setting::Ucl;
    HardeningSpec hardening = HardeningSpec::identity();

    bool uses_hardening() const {
        return setting == Setting::HUcl || setting == Setting::HScl || setting == Setting::HCol;
    }
    // hardening actually in force (identity for UCL/SCL)
    HardeningSpec effective_hardening() const {
        return uses_hardening() ? hardening : HardeningSpec::identity();
    }
};

std::string to_string(const NegSamplingSpec& spec);

// Normalizers of the four hardened/filtered distributions at one anchor.
// alpha_hucl = alpha_hscl + alpha_hcol up to summation rounding.
struct AlphaReport {
    double alpha_scl = 0.0;
    double alpha_hucl = 0.0;
    double alpha_hscl = 0.0;
    double alpha_hcol = 0.0;
};

// r(z) = rho(z) p(z) / alpha with alpha = sum rho*p; throws ZeroMassError
// when alpha = 0 and NumericalError when alpha is not finite.
Vec tilt(std::span<const double> p, std::span<const double> rho);

// Exact expectation of values under dist.
double expected_under(std::span<const double> dist, std::span<const double> values);

// k iid categorical draws; deterministic per seed.
std::vector<std::size_t> sample_negatives(std::span<const double> dist, std::size_t k,
                                          std::uint64_t seed);

using EmbeddingTable = std::vector<EmbeddingVector>;

EmbeddingTable embed_population(const Population& pop, const Embedder& f);

// g(anchor, point_j) for every j.
Vec similarity_row(const EmbeddingVector& anchor, const EmbeddingTable& table, SimilarityParams p);

AlphaReport compute_alphas(const Population& pop, std::size_t anchor_index, const Embedder& f,
                           const HardeningSpec& h, SimilarityParams p);
AlphaReport compute_alphas_row(const Population& pop, std::size_t anchor_index,
                               std::span<const double> g_row, const HardeningSpec& h);

// Probability vector over the population for the given setting. Throws
// ZeroMassError naming the setting and anchor when the normalizer is 0.
Vec neg_distribution(const Population& pop, std::size_t anchor_index, const NegSamplingSpec& spec,
                     const Embedder& f, SimilarityParams p);
Vec neg_distribution_row(const Population& pop, std::size_t anchor_index,
                         const NegSamplingSpec& spec, std::span<const double> g_row);

// Threshold hard sets at one anchor; hscl and hcol partition hucl.
struct HardSets {
    std::vector<std::size_t> scl;
    std::vector<std::size_t> hucl;
    std::vector<std::size_t> hscl;
    std::vector<std::size_t> hcol;
};

HardSets hard_sets(const Population& pop, std::size_t anchor_index, const Embedder& f, double tau,
                   SimilarityParams p);
HardSets hard_sets_row(const Population& pop, std::size_t anchor_index,
                       std::span<const double> g_row, double tau);

} // namespace hardcl

#endif
