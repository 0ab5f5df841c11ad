#ifndef HARDCL_TRAINER_HPP
#define HARDCL_TRAINER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hardcl/losses.hpp"
#include "hardcl/population.hpp"
#include "hardcl/synth.hpp"

namespace hardcl {

// Adam with moments (0.9, 0.999) and epsilon 1e-8.
class Adam {
public:
    Adam(const Embedder& e, double learning_rate);
    void step(Embedder& e, const Gradients& g);

private:
    double lr_;
    std::size_t t_ = 0;
    Gradients m_, v_;
};

struct TrainConfig {
    Setting setting = Setting::HScl;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double gamma = 0.5;
    double m_scale = 0.0; // Eq-style batch loss scalar M; 0 means batch_size - 2
    std::optional<double> beta;
    std::optional<std::pair<double, double>> tau_range; // threshold schedule endpoints
    double aug_sigma = 0.5;
    std::size_t embed_dim = 8;
    std::vector<std::size_t> hidden_widths = {32, 32};
    std::uint64_t seed = 1;
    // Exact-loss/assumption tracking and probing run on epochs that are
    // multiples of the cadence, plus always the final epoch. Skipped
    // epochs carry the most recent values (NaN before the first).
    std::size_t losses_every = 1;
    std::size_t probe_every = 1;
    double probe_train_fraction = 0.7;
    int n_threads = 1;

    void validate() const;
    double effective_m() const;
    // hardening in force at a 1-based epoch (threshold follows the
    // schedule; beta is constant; default exp tilt beta = 1)
    HardeningSpec hardening_at(std::size_t epoch) const;
    PositiveMode positive_mode() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double loss_ucl = 0.0;
    double loss_scl = 0.0;
    double loss_hucl = 0.0;
    double loss_hscl = 0.0;
    double assumption_fraction = 0.0;
    double probe_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    Embedder embedder;
};

// tau = e^{l/gamma} with l interpolating linearly from start (epoch 1)
// to end (epoch n_epochs).
double tau_schedule_value(double start, double end, std::size_t epoch, std::size_t n_epochs,
                          double gamma);

// One positive per anchor, drawn from the anchor's class and augmented:
// the shared supervised pairing used for all tracked loss curves.
PositivePairing frozen_eval_pairing(const Population& pop, double aug_sigma, Rng& rng);

TrainResult train(const Population& pop, const TrainConfig& cfg, Embedder init);
TrainResult train(const Population& pop, const TrainConfig& cfg);

// Multinomial logistic regression on frozen embeddings: full-batch
// gradient descent to gradient-norm 1e-6 or 5000 iterations; returns
// top-1 accuracy on the test split.
double linear_probe(const EmbeddingTable& train_x, std::span<const int> train_y,
                    const EmbeddingTable& test_x, std::span<const int> test_y);

struct ProbeSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
ProbeSplit stratified_split(const Population& pop, double train_fraction, Rng& rng);

struct ComparisonRow {
    std::string setting;
    double mean_acc = 0.0;
    double std_acc = 0.0;
    std::size_t n_seeds = 0;
};

std::vector<ComparisonRow> run_method_comparison(const Population& pop, const TrainConfig& base,
                                                 std::span<const Setting> settings,
                                                 std::span<const std::uint64_t> seeds);

void write_history_csv(const std::string& path, std::span<const EpochRecord> history);
void write_comparison_csv(const std::string& path, std::span<const ComparisonRow> rows);

} // namespace hardcl

#endif
