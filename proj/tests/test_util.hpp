#ifndef HARDCL_TEST_UTIL_HPP
#define HARDCL_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <functional>

#include "hardcl/embedder.hpp"
#include "hardcl/rng.hpp"

namespace hardcl::testutil {

struct ParamRef {
    std::size_t layer = 0;
    bool bias = false;
    std::size_t idx = 0;
};

inline double& param_at(Embedder& e, ParamRef r) {
    return r.bias ? e.bias(r.layer)[r.idx] : e.weight(r.layer)[r.idx];
}

inline double analytic_at(const Gradients& g, ParamRef r) {
    return r.bias ? g.biases[r.layer][r.idx] : g.weights[r.layer][r.idx];
}

inline ParamRef random_param(const Embedder& e, Rng& rng) {
    ParamRef r;
    r.layer = rng.uniform_index(e.num_layers());
    r.bias = rng.uniform() < 0.2;
    r.idx = rng.uniform_index(r.bias ? e.bias(r.layer).size() : e.weight(r.layer).size());
    return r;
}

// independent oracle: central finite difference through a full re-evaluation
inline double central_fd(const Embedder& e, ParamRef r, double h,
                         const std::function<double(const Embedder&)>& loss) {
    Embedder probe = e;
    double orig = param_at(probe, r);
    param_at(probe, r) = orig + h;
    double lp = loss(probe);
    param_at(probe, r) = orig - h;
    double lm = loss(probe);
    return (lp - lm) / (2.0 * h);
}

inline double rel_err(double a, double b) {
    double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
    return std::fabs(a - b) / denom;
}

} // namespace hardcl::testutil

#endif
