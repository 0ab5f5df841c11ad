#ifndef HARDCL_HARDENING_HPP
#define HARDCL_HARDENING_HPP

#include <span>
#include <string>

namespace hardcl {

// Nonnegative nondecreasing reweighting of the negative-sampling
// distribution. Three variants:
//   identity      eta(t) = 1          (recovers the unhardened setting)
//   exp_tilt      eta(t) = e^{beta t}
//   threshold     eta(t) = 1(e^t >= tau), inclusive at the boundary
struct HardeningSpec {
    enum class Variant { Identity, ExpTilt, Threshold };

    Variant variant = Variant::Identity;
    double beta = 0.0; // ExpTilt only, > 0
    double tau = 0.0;  // Threshold only, > 0

    static HardeningSpec identity();
    static HardeningSpec exp_tilt(double beta);
    static HardeningSpec threshold(double tau);

    void validate() const;
    bool is_identity() const { return variant == Variant::Identity; }
};

double eta(const HardeningSpec& h, double t);

// log eta for the exponential tilt; lets distribution code stay in log
// space when beta*t would overflow exp.
double log_eta_exp(const HardeningSpec& h, double t);

// Derivative of eta where it exists (0 for identity and threshold,
// beta*e^{beta t} for the exponential tilt). Used by the batch gradient.
double eta_derivative_factor(const HardeningSpec& h); // d(eta)/dt = factor * eta for exp, else 0

// True iff eta is nonnegative and nondecreasing over the ascending grid.
bool check_hardening_validity(const HardeningSpec& h, std::span<const double> grid);

// Same check for an arbitrary scalar function; used for negative controls.
template <typename F>
bool check_function_validity(F&& f, std::span<const double> grid);

std::string to_string(const HardeningSpec& h);

template <typename F>
bool check_function_validity(F&& f, std::span<const double> grid) {
    double prev = 0.0;
    bool first = true;
    for (double t : grid) {
        double v = f(t);
        if (v < 0.0) return false;
        if (!first && v < prev) return false;
        prev = v;
        first = false;
    }
    return true;
}

} // namespace hardcl

#endif
