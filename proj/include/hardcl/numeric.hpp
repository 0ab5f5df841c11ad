#ifndef HARDCL_NUMERIC_HPP
#define HARDCL_NUMERIC_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace hardcl {

using Vec = std::vector<double>;

// Kahan compensated accumulator; keeps long sums accurate enough for the
// 1e-12 identities checked throughout, up to ~1e5 terms.
class KahanSum {
public:
    void add(double x) {
        double y = x - comp_;
        double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double kahan_sum(std::span<const double> xs) {
    KahanSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

inline bool all_finite(std::span<const double> a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace hardcl

#endif
