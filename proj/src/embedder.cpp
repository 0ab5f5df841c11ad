#include "hardcl/embedder.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hardcl/errors.hpp"

namespace hardcl {

Gradients Gradients::zeros_like(const Embedder& e) {
    Gradients g;
    g.weights.resize(e.num_layers());
    g.biases.resize(e.num_layers());
    for (std::size_t l = 0; l < e.num_layers(); ++l) {
        g.weights[l].assign(e.weight(l).size(), 0.0);
        g.biases[l].assign(e.bias(l).size(), 0.0);
    }
    return g;
}

void Gradients::zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void Gradients::axpy(double a, const Gradients& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += a * other.weights[l][i];
        for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += a * other.biases[l][i];
    }
}

void Gradients::scale(double s) {
    for (auto& w : weights)
        for (auto& x : w) x *= s;
    for (auto& b : biases)
        for (auto& x : b) x *= s;
}

double Gradients::max_abs() const {
    double m = 0.0;
    for (const auto& w : weights)
        for (double x : w) m = std::max(m, std::fabs(x));
    for (const auto& b : biases)
        for (double x : b) m = std::max(m, std::fabs(x));
    return m;
}

Embedder::Embedder(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw InputError("embedder: need input and output widths");
    if (widths_.back() < 2) throw InputError("embedder: output dimension must be >= 2");
    for (std::size_t w : widths_)
        if (w == 0) throw InputError("embedder: zero layer width");
    weights_.resize(num_layers());
    biases_.resize(num_layers());
    for (std::size_t l = 0; l < num_layers(); ++l) {
        weights_[l].assign(widths_[l + 1] * widths_[l], 0.0);
        biases_[l].assign(widths_[l + 1], 0.0);
    }
}

Embedder Embedder::random_init(std::vector<std::size_t> widths, Rng& rng) {
    Embedder e(std::move(widths));
    for (std::size_t l = 0; l < e.num_layers(); ++l) {
        double bound = 1.0 / std::sqrt(static_cast<double>(e.widths_[l]));
        for (auto& w : e.weights_[l]) w = rng.uniform(-bound, bound);
        for (auto& b : e.biases_[l]) b = rng.uniform(-bound, bound);
    }
    return e;
}

namespace {

// z = W a + b, W row-major (out x in)
void affine(const Vec& w, const Vec& b, std::span<const double> a, Vec& z) {
    const std::size_t out = b.size();
    const std::size_t in = a.size();
    z.resize(out);
    for (std::size_t i = 0; i < out; ++i) {
        double s = b[i];
        const double* row = w.data() + i * in;
        for (std::size_t j = 0; j < in; ++j) s += row[j] * a[j];
        z[i] = s;
    }
}

} // namespace

EmbeddingVector Embedder::forward(std::span<const double> x) const {
    Tape tape;
    return forward(x, tape);
}

EmbeddingVector Embedder::forward(std::span<const double> x, Tape& tape) const {
    if (x.size() != input_dim()) throw InputError("embedder: input width mismatch");
    if (!all_finite(x)) throw InputError("embedder: non-finite input coordinate");

    tape.input.assign(x.begin(), x.end());
    tape.hidden.clear();
    tape.hidden.reserve(num_layers() - 1);

    Vec cur(x.begin(), x.end());
    Vec z;
    for (std::size_t l = 0; l + 1 < num_layers(); ++l) {
        affine(weights_[l], biases_[l], cur, z);
        for (auto& v : z) v = std::tanh(v);
        if (!all_finite(z))
            throw NumericalError("embedder: non-finite activation at layer " + std::to_string(l));
        tape.hidden.push_back(z);
        cur = z;
    }
    affine(weights_.back(), biases_.back(), cur, tape.prenorm);
    if (!all_finite(tape.prenorm))
        throw NumericalError("embedder: non-finite output at layer " + std::to_string(num_layers() - 1));

    double r = norm2(tape.prenorm);
    if (r < 1e-12)
        throw NumericalError("embedder: output collapsed to zero before normalization");
    tape.prenorm_norm = r;
    tape.output.resize(output_dim());
    for (std::size_t i = 0; i < output_dim(); ++i) tape.output[i] = tape.prenorm[i] / r;
    return EmbeddingVector{tape.output};
}

void Embedder::backward(const Tape& tape, std::span<const double> dloss_dout, Gradients& grads) const {
    const std::size_t d = output_dim();
    if (dloss_dout.size() != d) throw InputError("backward: gradient dimension mismatch");

    // through y = z / ||z||:  dz = (g - (g.y) y) / ||z||
    Vec delta(d);
    double gy = 0.0;
    for (std::size_t i = 0; i < d; ++i) gy += dloss_dout[i] * tape.output[i];
    for (std::size_t i = 0; i < d; ++i)
        delta[i] = (dloss_dout[i] - gy * tape.output[i]) / tape.prenorm_norm;

    // walk layers backwards; layer l consumes activation a_{l-1}
    for (std::size_t li = num_layers(); li-- > 0;) {
        const Vec& a_prev = li == 0 ? tape.input : tape.hidden[li - 1];
        const std::size_t out = widths_[li + 1];
        const std::size_t in = widths_[li];

        Vec& gw = grads.weights[li];
        Vec& gb = grads.biases[li];
        for (std::size_t i = 0; i < out; ++i) {
            gb[i] += delta[i];
            double* grow = gw.data() + i * in;
            for (std::size_t j = 0; j < in; ++j) grow[j] += delta[i] * a_prev[j];
        }
        if (li == 0) break;

        Vec prev_delta(in, 0.0);
        const Vec& w = weights_[li];
        for (std::size_t i = 0; i < out; ++i) {
            const double* row = w.data() + i * in;
            for (std::size_t j = 0; j < in; ++j) prev_delta[j] += row[j] * delta[i];
        }
        // tanh' = 1 - a^2 with a the stored activation
        const Vec& a = tape.hidden[li - 1];
        for (std::size_t j = 0; j < in; ++j) prev_delta[j] *= 1.0 - a[j] * a[j];
        delta = std::move(prev_delta);
    }
}

void Embedder::apply_update(const Gradients& step) {
    for (std::size_t l = 0; l < num_layers(); ++l) {
        for (std::size_t i = 0; i < weights_[l].size(); ++i) weights_[l][i] += step.weights[l][i];
        for (std::size_t i = 0; i < biases_[l].size(); ++i) biases_[l][i] += step.biases[l][i];
    }
}

namespace {

void write_doubles_le(std::ostream& os, const Vec& v) {
    for (double x : v) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
        unsigned char buf[8];
        for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
        os.write(reinterpret_cast<const char*>(buf), 8);
    }
}

void read_doubles_le(std::istream& is, Vec& v) {
    for (double& x : v) {
        unsigned char buf[8];
        is.read(reinterpret_cast<char*>(buf), 8);
        if (!is) throw InputError("embedder load: truncated data block");
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
        x = std::bit_cast<double>(bits);
    }
}

} // namespace

void Embedder::save(std::ostream& os) const {
    os << "hardcl embedder v1\n";
    os << "widths:";
    for (std::size_t w : widths_) os << ' ' << w;
    os << "\nactivation: tanh\ndata\n";
    for (std::size_t l = 0; l < num_layers(); ++l) {
        write_doubles_le(os, weights_[l]);
        write_doubles_le(os, biases_[l]);
    }
}

Embedder Embedder::load(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "hardcl embedder v1")
        throw InputError("embedder load: bad magic line");
    if (!std::getline(is, line) || line.rfind("widths:", 0) != 0)
        throw InputError("embedder load: missing widths line");
    std::istringstream ws(line.substr(7));
    std::vector<std::size_t> widths;
    std::size_t w;
    while (ws >> w) widths.push_back(w);
    if (!std::getline(is, line) || line != "activation: tanh")
        throw InputError("embedder load: unsupported activation");
    if (!std::getline(is, line) || line != "data")
        throw InputError("embedder load: missing data marker");

    Embedder e(widths);
    for (std::size_t l = 0; l < e.num_layers(); ++l) {
        read_doubles_le(is, e.weights_[l]);
        read_doubles_le(is, e.biases_[l]);
    }
    return e;
}

void Embedder::save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("embedder save: cannot open " + path);
    save(os);
    if (!os) throw InputError("embedder save: write failed for " + path);
}

Embedder Embedder::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("embedder load: cannot open " + path);
    return load(is);
}

bool Embedder::operator==(const Embedder& other) const {
    if (widths_ != other.widths_) return false;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        for (std::size_t i = 0; i < weights_[l].size(); ++i)
            if (std::bit_cast<std::uint64_t>(weights_[l][i]) !=
                std::bit_cast<std::uint64_t>(other.weights_[l][i]))
                return false;
        for (std::size_t i = 0; i < biases_[l].size(); ++i)
            if (std::bit_cast<std::uint64_t>(biases_[l][i]) !=
                std::bit_cast<std::uint64_t>(other.biases_[l][i]))
                return false;
    }
    return true;
}

} // namespace hardcl
