#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "calmreg/error.hpp"
#include "calmreg/qform_bounds.hpp"
#include "support.hpp"

using namespace calmreg;
using namespace testing_support;

TEST_CASE("z quantile closed forms") {
    const SpectrumStats s = make_stats(4, 4, 1);
    const ZQuantile z = z_quantile(s, 1.0);
    CHECK(z.z_sq == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(z.z == doctest::Approx(2.0 + std::sqrt(2.0)).epsilon(1e-15));
    const ZQuantile zi = z_quantile(identity_stats(20), 2.0);
    CHECK(zi.z_sq == doctest::Approx(20 + 2 * std::sqrt(40.0) + 4).epsilon(1e-15));
    CHECK(z_quantile(identity_stats(20), 0.0).z_sq == doctest::Approx(20.0));
}

TEST_CASE("spectrum stats of a matrix") {
    Mat b = Vec((Vec(3) << 1.0, 0.5, 0.25).finished()).asDiagonal();
    const SpectrumStats s = spectrum_stats(b);
    CHECK(s.dim_a == doctest::Approx(1.75));
    CHECK(s.v2 == doctest::Approx(1.3125));
    CHECK(s.b_norm == doctest::Approx(1.0));
    CHECK(s.v() == doctest::Approx(std::sqrt(1.3125)));
}

TEST_CASE("stats invariants are enforced") {
    CHECK_THROWS_AS(make_stats(-1, 1, 1), ValidationError);
    CHECK_THROWS_AS(make_stats(1, 4, 2), ValidationError);  // b_norm > dim_a
    CHECK_THROWS_AS(make_stats(4, 0.5, 1), ValidationError);  // b_norm² > v2
    CHECK_THROWS_AS(make_stats(4, 10, 1), ValidationError);  // v2 > b_norm·dim_a
    Mat nonsym(2, 2);
    nonsym << 1, 1, 0, 1;
    CHECK_THROWS_AS(spectrum_stats(nonsym), ValidationError);
}

TEST_CASE("exponential moment bound dominates the gaussian determinant") {
    CounterRng rng(11, 0);
    for (int k = 0; k < 40; ++k) {
        const int d = 1 + static_cast<int>(rng.uniform() * 20);
        const Mat q = random_orthogonal(rng, d);
        Vec ev(d);
        for (int i = 0; i < d; ++i) ev(i) = rng.uniform();
        ev(0) = 1.0;
        Mat b = q * ev.asDiagonal() * q.transpose();
        b = 0.5 * (b + b.transpose());
        for (double mu : {0.1, 0.5, 0.9}) {
            double oracle = 1.0;
            for (int i = 0; i < d; ++i) oracle /= std::sqrt(1.0 - mu * ev(i));
            CHECK(gaussian_det_moment(b, mu) == doctest::Approx(oracle).epsilon(1e-11));
            CHECK(exp_moment_bound(spectrum_stats(b), mu) >= oracle * (1 - 1e-12));
        }
    }
    CHECK_THROWS_AS(exp_moment_bound(identity_stats(3), 1.0), DomainError);
}

TEST_CASE("crossover level for (4, 2, 20)") {
    const SpectrumStats s = make_stats(4, 4, 1);
    const ExpTailSolution sol = solve_xc(20.0, s);
    CHECK(sol.x_c > 135.0);
    CHECK(sol.x_c < 140.0);
    CHECK(sol.residual <= 1e-8);
    CHECK(sol.mu_c == doctest::Approx(mu_of_x(s, sol.x_c)));
    // Root of the defining relation written out directly.
    auto h = [](double x) {
        const double mu = 1 / (1 + 2 / (2 * std::sqrt(x)));
        return (20 - std::sqrt(4 * mu)) / mu - (2 + std::sqrt(2 * x) + 1);
    };
    CHECK(h(sol.x_c * 0.999) > 0);
    CHECK(h(sol.x_c * 1.001) < 0);
    CHECK(std::abs(h(sol.x_c)) < 1e-7);
}

TEST_CASE("crossover requires a large enough radius and unit norm") {
    CHECK_THROWS(solve_xc(1.0, make_stats(4, 4, 1)));
    CHECK_THROWS(solve_xc(20.0, make_stats(8, 16, 2)));
}

TEST_CASE("g_for_crossover inverts solve_xc") {
    const SpectrumStats s = identity_stats(20);
    // too small a target needs g below √dim_a, which solve_xc rejects
    CHECK_THROWS(solve_xc(g_for_crossover(s, 0.5), s));
    for (double target : {2.5, 10.0, 100.0}) {
        const ExpTailSolution sol = solve_xc(g_for_crossover(s, target), s);
        CHECK(sol.x_c == doctest::Approx(target).epsilon(1e-6));
    }
}

TEST_CASE("z_c branches and monotonicity") {
    const SpectrumStats s = make_stats(4, 4, 1);
    const ExpTailSolution sol = solve_xc(20.0, s);
    CHECK(zc_branch(sol, 1.0) == TailBranch::gaussian);
    CHECK(zc_branch(sol, 200.0) == TailBranch::exponential);
    CHECK(zc_quantile(sol, s, 1.0) == doctest::Approx(std::sqrt(10.0)));
    double prev = 0;
    for (double x = 0.5; x < 400; x *= 1.3) {
        const double z = zc_quantile(sol, s, x);
        CHECK(z > prev);
        prev = z;
    }
    // exponential branch grows linearly with slope 2/g_c
    const double a = zc_quantile(sol, s, 200), b = zc_quantile(sol, s, 300);
    CHECK((b - a) / 100 == doctest::Approx(2 / sol.g_c));
}

TEST_CASE("lower tail threshold") {
    const LowerTail lt = lower_tail_threshold(identity_stats(16), 1.0);
    CHECK(lt.threshold == doctest::Approx(8.0).epsilon(1e-15));
    CHECK_FALSE(lt.vacuous);
    CHECK(lower_tail_threshold(identity_stats(16), 5.0).vacuous);
}

TEST_CASE("gaussian upper deviation probability is below exp(-x)") {
    CounterRng rng(3, 1);
    const int n = 20000;
    std::vector<double> sq(n);
    for (int i = 0; i < n; ++i) sq[i] = gaussian_vector(rng, 10).squaredNorm();
    for (double x : {0.5, 1.0, 2.0}) {
        const double thr = z_quantile(identity_stats(10), x).z_sq;
        const double rate = std::count_if(sq.begin(), sq.end(), [&](double v) { return v > thr; }) / double(n);
        CHECK(rate <= std::exp(-x) + 3 * std::sqrt(std::exp(-x) / n));
    }
}

TEST_CASE("minimal radius for the gaussian regime") {
    CHECK(min_g_for_gaussian_regime(identity_stats(4), 4.0) == doctest::Approx(1 + std::pow(4.0, 0.25)));
    CHECK_THROWS_AS(min_g_for_gaussian_regime(identity_stats(4), 0.0), DomainError);
}
