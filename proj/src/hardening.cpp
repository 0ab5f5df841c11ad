#include "hardcl/hardening.hpp"

#include <cmath>

#include "hardcl/errors.hpp"

namespace hardcl {

HardeningSpec HardeningSpec::identity() {
    return HardeningSpec{Variant::Identity, 0.0, 0.0};
}

HardeningSpec HardeningSpec::exp_tilt(double beta) {
    HardeningSpec h{Variant::ExpTilt, beta, 0.0};
    h.validate();
    return h;
}

HardeningSpec HardeningSpec::threshold(double tau) {
    HardeningSpec h{Variant::Threshold, 0.0, tau};
    h.validate();
    return h;
}

void HardeningSpec::validate() const {
    switch (variant) {
    case Variant::Identity:
        return;
    case Variant::ExpTilt:
        if (!(beta > 0.0) || !std::isfinite(beta))
            throw InputError("hardening: exp_tilt requires beta > 0");
        return;
    case Variant::Threshold:
        if (!(tau > 0.0) || !std::isfinite(tau))
            throw InputError("hardening: threshold requires tau > 0");
        return;
    }
    throw InputError("hardening: unknown variant");
}

double eta(const HardeningSpec& h, double t) {
    switch (h.variant) {
    case HardeningSpec::Variant::Identity:
        return 1.0;
    case HardeningSpec::Variant::ExpTilt:
        return std::exp(h.beta * t);
    case HardeningSpec::Variant::Threshold:
        return std::exp(t) >= h.tau ? 1.0 : 0.0;
    }
    return 0.0;
}

double log_eta_exp(const HardeningSpec& h, double t) {
    if (h.variant != HardeningSpec::Variant::ExpTilt)
        throw InputError("log_eta_exp: only defined for the exponential tilt");
    return h.beta * t;
}

double eta_derivative_factor(const HardeningSpec& h) {
    return h.variant == HardeningSpec::Variant::ExpTilt ? h.beta : 0.0;
}

bool check_hardening_validity(const HardeningSpec& h, std::span<const double> grid) {
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] < grid[i - 1]) throw InputError("check_hardening_validity: grid not ascending");
    return check_function_validity([&](double t) { return eta(h, t); }, grid);
}

std::string to_string(const HardeningSpec& h) {
    switch (h.variant) {
    case HardeningSpec::Variant::Identity:
        return "identity";
    case HardeningSpec::Variant::ExpTilt:
        return "exp_tilt(beta=" + std::to_string(h.beta) + ")";
    case HardeningSpec::Variant::Threshold:
        return "threshold(tau=" + std::to_string(h.tau) + ")";
    }
    return "?";
}

} // namespace hardcl
