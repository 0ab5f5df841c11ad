#include "hardcl/rng.hpp"

#include <cmath>
#include <numbers>

#include "hardcl/errors.hpp"

namespace hardcl {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
    std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double Rng::normal(double mean, double sigma) {
    return mean + sigma * normal();
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw InputError("uniform_index: n must be positive");
    // modulo bias is below 2^-44 for every n used here
    return static_cast<std::size_t>(next_u64() % n);
}

Rng Rng::derive(std::uint64_t salt) const {
    std::uint64_t s = seed_ ^ (0x6a09e667f3bcc909ULL + salt);
    return Rng(splitmix64(s));
}

// Vose's method over the support, so zero-probability entries can never
// be drawn regardless of floating leftovers.
AliasTable::AliasTable(std::span<const double> probs) {
    if (probs.empty()) throw InputError("alias table: empty distribution");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw InputError("alias table: negative or NaN probability");
        total += p;
    }
    if (!(total > 0.0)) throw InputError("alias table: zero total mass");

    for (std::size_t i = 0; i < probs.size(); ++i)
        if (probs[i] > 0.0) support_.push_back(static_cast<std::uint32_t>(i));

    const std::size_t n = support_.size();
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);

    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i)
        scaled[i] = probs[support_[i]] / total * static_cast<double>(n);

    std::vector<std::uint32_t> small, large;
    small.reserve(n);
    large.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (scaled[i] < 1.0)
            small.push_back(static_cast<std::uint32_t>(i));
        else
            large.push_back(static_cast<std::uint32_t>(i));
    }
    while (!small.empty() && !large.empty()) {
        std::uint32_t s = small.back();
        small.pop_back();
        std::uint32_t l = large.back();
        prob_[s] = scaled[s];
        alias_[s] = l;
        scaled[l] = (scaled[l] + scaled[s]) - 1.0;
        if (scaled[l] < 1.0) {
            large.pop_back();
            small.push_back(l);
        }
    }
    for (std::uint32_t l : large) prob_[l] = 1.0;
    for (std::uint32_t s : small) prob_[s] = 1.0;
}

std::size_t AliasTable::sample(Rng& rng) const {
    std::size_t i = rng.uniform_index(prob_.size());
    double u = rng.uniform();
    std::size_t cell = u < prob_[i] ? i : static_cast<std::size_t>(alias_[i]);
    return static_cast<std::size_t>(support_[cell]);
}

} // namespace hardcl
