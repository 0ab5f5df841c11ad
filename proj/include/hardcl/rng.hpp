#ifndef HARDCL_RNG_HPP
#define HARDCL_RNG_HPP

#include <cstdint>
#include <cstddef>
#include <span>
#include <vector>

namespace hardcl {

// xoshiro256++ seeded through splitmix64. Self-contained so streams are
// reproducible across standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // uniform in [0, 1)
    double uniform();
    double uniform(double lo, double hi);

    // standard normal, Box-Muller with a cached spare
    double normal();
    double normal(double mean, double sigma);

    // uniform integer in [0, n), n >= 1
    std::size_t uniform_index(std::size_t n);

    // independent stream derived from this rng's seed and a salt
    Rng derive(std::uint64_t salt) const;

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_[4];
    std::uint64_t seed_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Walker alias table for O(1) categorical sampling. Entries with zero
// probability are never returned.
class AliasTable {
public:
    explicit AliasTable(std::span<const double> probs);
    std::size_t sample(Rng& rng) const;
    std::size_t size() const { return prob_.size(); }

private:
    std::vector<std::uint32_t> support_;
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

} // namespace hardcl

#endif
