#ifndef HARDCL_GEOMETRY_HPP
#define HARDCL_GEOMETRY_HPP

#include <span>

#include "hardcl/numeric.hpp"

namespace hardcl {

// A point on the unit sphere S^{d-1}, d >= 2.
struct EmbeddingVector {
    Vec coords;
    std::size_t dim() const { return coords.size(); }
};

// Temperature of the similarity kernel g(a, b) = a.b / gamma.
struct SimilarityParams {
    double gamma = 0.5;
    void validate() const;
};

// v / ||v||. Rejects vectors with norm below 1e-12 and dimension below 2.
EmbeddingVector normalize(std::span<const double> v);

// Inner product over gamma; |result| <= 1/gamma for unit-norm inputs.
double similarity(const EmbeddingVector& a, const EmbeddingVector& b, SimilarityParams p);

} // namespace hardcl

#endif
