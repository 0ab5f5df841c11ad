#ifndef HARDCL_EMBEDDER_HPP
#define HARDCL_EMBEDDER_HPP

#include <iosfwd>
#include <span>
#include <vector>

#include "hardcl/geometry.hpp"
#include "hardcl/rng.hpp"

namespace hardcl {

class Embedder;

// Per-parameter gradient buffers with the same shapes as an Embedder.
struct Gradients {
    std::vector<Vec> weights;
    std::vector<Vec> biases;

    static Gradients zeros_like(const Embedder& e);
    void zero();
    void axpy(double a, const Gradients& other);
    void scale(double s);
    double max_abs() const;
};

// Fully connected net: tanh hidden layers, linear final layer, output
// projected to the unit sphere. Widths are {input, hidden..., output},
// output dim >= 2. Forward passes are pure and bit-for-bit deterministic.
class Embedder {
public:
    explicit Embedder(std::vector<std::size_t> widths);

    // weights and biases uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
    static Embedder random_init(std::vector<std::size_t> widths, Rng& rng);

    std::size_t input_dim() const { return widths_.front(); }
    std::size_t output_dim() const { return widths_.back(); }
    std::size_t num_layers() const { return widths_.size() - 1; }
    const std::vector<std::size_t>& widths() const { return widths_; }

    // layer l: weight is row-major (widths[l+1] x widths[l])
    Vec& weight(std::size_t l) { return weights_[l]; }
    const Vec& weight(std::size_t l) const { return weights_[l]; }
    Vec& bias(std::size_t l) { return biases_[l]; }
    const Vec& bias(std::size_t l) const { return biases_[l]; }

    EmbeddingVector forward(std::span<const double> x) const;

    // Intermediate state of one forward pass, for backprop.
    struct Tape {
        Vec input;
        std::vector<Vec> hidden; // tanh activations per hidden layer
        Vec prenorm;             // final linear output
        double prenorm_norm = 0.0;
        Vec output;              // prenorm / ||prenorm||
    };
    EmbeddingVector forward(std::span<const double> x, Tape& tape) const;

    // Accumulates d(loss)/d(parameters) into grads, given d(loss)/d(output
    // embedding). Backpropagates through the sphere projection.
    void backward(const Tape& tape, std::span<const double> dloss_dout, Gradients& grads) const;

    void apply_update(const Gradients& step); // parameters += step

    // Plain-text shape header followed by little-endian doubles; the
    // round trip is bit-exact.
    void save(std::ostream& os) const;
    static Embedder load(std::istream& is);
    void save_file(const std::string& path) const;
    static Embedder load_file(const std::string& path);

    bool operator==(const Embedder& other) const;

private:
    std::vector<std::size_t> widths_;
    std::vector<Vec> weights_;
    std::vector<Vec> biases_;
};

} // namespace hardcl

#endif
