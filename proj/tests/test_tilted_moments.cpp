#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "calmreg/error.hpp"
#include "calmreg/tilted_moments.hpp"

using namespace calmreg;

namespace {
// k-th derivative of a scalar function by Richardson-extrapolated central differences.
double d_k(const std::function<double(double)>& f, double t, int k) {
    auto stencil = [&](double h) {
        switch (k) {
            case 1: return (f(t + h) - f(t - h)) / (2 * h);
            case 2: return (f(t + h) - 2 * f(t) + f(t - h)) / (h * h);
            case 3: return (f(t + 2 * h) - 2 * f(t + h) + 2 * f(t - h) - f(t - 2 * h)) / (2 * h * h * h);
            default: return (f(t + 2 * h) - 4 * f(t + h) + 6 * f(t) - 4 * f(t - h) + f(t - 2 * h)) / (h * h * h * h);
        }
    };
    const double h = k <= 2 ? 1e-3 : 2e-2;
    const double a = stencil(h), b = stencil(h / 2);
    return b + (b - a) / 3;
}
}  // namespace

TEST_CASE("gaussian law has vanishing higher cumulants") {
    const TiltedSummary s = tau34(gaussian_law(), 3.0);
    CHECK(s.tau3 == 0.0);
    CHECK(s.tau4 == 0.0);
    CHECK(s.subg_const == doctest::Approx(1.0));
    const Cumulants c = tilted_cumulants(gaussian_law(0.5), 0.7);
    CHECK(c.phi == doctest::Approx(0.1225));
    CHECK(c.d2 == doctest::Approx(0.5));
    CHECK_THROWS_AS(gaussian_law(2.0), ValidationError);
}

TEST_CASE("rademacher cumulants match log cosh derivatives") {
    auto lc = [](double t) { return std::log(std::cosh(t)); };
    for (double t : {0.0, 0.3, 1.0, 2.5}) {
        const Cumulants c = tilted_cumulants(rademacher_law(), t);
        CHECK(c.phi == doctest::Approx(lc(t)).epsilon(1e-14));
        CHECK(c.d1 == doctest::Approx(d_k(lc, t, 1)).epsilon(1e-7));
        CHECK(c.d2 == doctest::Approx(d_k(lc, t, 2)).epsilon(1e-6));
        CHECK(c.d3 == doctest::Approx(d_k(lc, t, 3)).epsilon(1e-5).scale(1));
        CHECK(c.d4 == doctest::Approx(d_k(lc, t, 4)).epsilon(1e-5).scale(1));
    }
    const TiltedSummary s = tau34(rademacher_law(), 1.0);
    CHECK(s.tau4 == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(tilted_cumulants(rademacher_law(), 600.0).phi == doctest::Approx(600.0 - std::log(2.0)));
}

TEST_CASE("tabulated law equals the analytic rademacher law") {
    const ScalarLaw tab = tabulated_law({-1.0, 1.0}, {0.5, 0.5});
    for (double t : {0.2, 1.3}) {
        const Cumulants a = tilted_cumulants(tab, t), b = tilted_cumulants(rademacher_law(), t);
        CHECK(a.d2 == doctest::Approx(b.d2).epsilon(1e-12));
        CHECK(a.d3 == doctest::Approx(b.d3).epsilon(1e-10));
        CHECK(a.d4 == doctest::Approx(b.d4).epsilon(1e-10));
    }
}

TEST_CASE("tabulated law validation") {
    CHECK_THROWS_AS(tabulated_law({-1, 1}, {0.3, 0.3}), ValidationError);
    CHECK_THROWS_AS(tabulated_law({0, 1}, {0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(tabulated_law({-2, 2}, {0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(tabulated_law({-1, 1}, {0.5}), ValidationError);
    CHECK_THROWS_AS(tilted_cumulants(tabulated_law({-1, 1}, {0.5, 0.5}), 1000.0), DomainError);
}

TEST_CASE("centered uniform law") {
    const Cumulants c0 = tilted_cumulants(centered_uniform_law(), 0.0);
    CHECK(c0.d2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c0.d4 == doctest::Approx(-1.2).epsilon(1e-10));  // excess kurtosis of the uniform
    // log E e^{tU} = log(sinh(√3 t)/(√3 t))
    auto psi = [](double t) { return std::log(std::sinh(std::sqrt(3.0) * t) / (std::sqrt(3.0) * t)); };
    CHECK(tilted_cumulants(centered_uniform_law(), 0.8).phi == doctest::Approx(psi(0.8)).epsilon(1e-12));
}

TEST_CASE("i.i.d. scaling") {
    const TauPair a = iid_tau_scaling(0.8, 2.0, 25), b = iid_tau_scaling(0.8, 2.0, 100);
    CHECK(a.tau3 == 2.0 * b.tau3);
    CHECK(a.tau4 == doctest::Approx(4.0 * b.tau4));
    CHECK_THROWS_AS(iid_tau_scaling(1, 1, 0), DomainError);
}

TEST_CASE("sharp bound terms") {
    const SharpTerms s = sharp_bound_terms(1.0, 4.0, 0.3, 40.0, 0.0, 0.0);
    CHECK(s.diamond4 == 0.0);
    const double xmu = 0.25 * std::pow(std::sqrt(1600.0 / 0.3) - 2.0, 2);
    CHECK(s.x_mu == doctest::Approx(xmu));
    CHECK(s.eps_mu == doctest::Approx(0.3 * (1 + std::sqrt(4.0 / xmu))));
    CHECK(s.delta_mu >= s.rho_mu);
    CHECK_THROWS(sharp_bound_terms(1.0, 4.0, 0.3, 1.0, 0.0, 0.0));
    CHECK(iid_delta_bound(1.0, 4.0, 400, 1.0) == doctest::Approx(iid_delta_bound(1.0, 4.0, 100, 1.0) / 4));
}
