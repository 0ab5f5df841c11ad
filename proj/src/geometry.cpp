#include "hardcl/geometry.hpp"

#include <cmath>

#include "hardcl/errors.hpp"

namespace hardcl {

void SimilarityParams::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw InputError("similarity: gamma must be a positive finite real");
}

EmbeddingVector normalize(std::span<const double> v) {
    if (v.size() < 2) throw InputError("normalize: need at least 2 coordinates");
    if (!all_finite(v)) throw InputError("normalize: non-finite coordinate");
    double r = norm2(v);
    if (r < 1e-12) throw InputError("normalize: degenerate input, norm below 1e-12");
    EmbeddingVector out;
    out.coords.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.coords[i] = v[i] / r;
    return out;
}

double similarity(const EmbeddingVector& a, const EmbeddingVector& b, SimilarityParams p) {
    p.validate();
    if (a.dim() != b.dim())
        throw InputError("similarity: dimension mismatch");
    return dot(a.coords, b.coords) / p.gamma;
}

} // namespace hardcl
