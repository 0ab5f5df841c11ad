#include "doctest.h"

#include <cmath>

#include "hardcl/errors.hpp"
#include "hardcl/hardening.hpp"
#include "hardcl/numeric.hpp"

using namespace hardcl;

namespace {

Vec make_grid(double lo, double hi, double step) {
    Vec g;
    for (double t = lo; t <= hi + 1e-9; t += step) g.push_back(t);
    return g;
}

} // namespace

TEST_CASE("identity variant is the constant-one reweighting") {
    auto h = HardeningSpec::identity();
    for (double t : {-5.0, -0.1, 0.0, 2.0, 100.0}) CHECK(eta(h, t) == 1.0);
}

TEST_CASE("exponential tilt values") {
    auto h = HardeningSpec::exp_tilt(1.0);
    CHECK(eta(h, 0.0) == 1.0);
    CHECK(eta(h, 1.0) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
    auto h2 = HardeningSpec::exp_tilt(2.0);
    CHECK(eta(h2, -1.5) == doctest::Approx(std::exp(-3.0)).epsilon(1e-15));
    CHECK(log_eta_exp(h2, 400.0) == 800.0); // representable where eta is not
}

TEST_CASE("threshold is inclusive at the boundary") {
    auto h = HardeningSpec::threshold(1.0);
    CHECK(eta(h, 0.0) == 1.0);  // e^0 = 1 >= 1
    CHECK(eta(h, -0.5) == 0.0); // e^{-0.5} < 1
    CHECK(eta(h, 0.3) == 1.0);
}

TEST_CASE("hardening parameter validation") {
    CHECK_THROWS_AS(HardeningSpec::exp_tilt(0.0), InputError);
    CHECK_THROWS_AS(HardeningSpec::exp_tilt(-1.0), InputError);
    CHECK_THROWS_AS(HardeningSpec::threshold(0.0), InputError);
    CHECK_THROWS_AS(HardeningSpec::threshold(-0.5), InputError);
    CHECK_THROWS_AS(log_eta_exp(HardeningSpec::identity(), 1.0), InputError);
}

TEST_CASE("validity check accepts the three variants") {
    Vec grid = make_grid(-2.0, 2.0, 0.05);
    CHECK(check_hardening_validity(HardeningSpec::identity(), grid));
    CHECK(check_hardening_validity(HardeningSpec::exp_tilt(2.0), grid));
    CHECK(check_hardening_validity(HardeningSpec::threshold(0.5), grid));
    CHECK(check_hardening_validity(HardeningSpec::threshold(1.0), grid));
}

TEST_CASE("validity check rejects a decreasing function") {
    Vec grid = make_grid(-2.0, 2.0, 0.1);
    CHECK_FALSE(check_function_validity([](double t) { return std::exp(-t); }, grid));
    CHECK_FALSE(check_function_validity([](double t) { return -t; }, grid)); // negative values
}

TEST_CASE("validity check requires an ascending grid") {
    Vec bad{0.0, -1.0, 1.0};
    CHECK_THROWS_AS(check_hardening_validity(HardeningSpec::identity(), bad), InputError);
}
