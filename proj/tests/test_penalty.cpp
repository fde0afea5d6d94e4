#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "calmreg/error.hpp"
#include "calmreg/penalty.hpp"
#include "support.hpp"

using namespace calmreg;
using namespace testing_support;

namespace {

PenaltyInputs orthonormal_inputs(int q, int p, double sigma_sq) {
    CounterRng rng(11, 0);
    PenaltyInputs in;
    in.A = random_orthogonal(rng, q).leftCols(p);
    in.G0_sq = Mat::Identity(p, p);
    in.sigma_sq = sigma_sq;
    return in;
}

}  // namespace

TEST_CASE("effective dimension with orthonormal design") {
    const PenaltyInputs in = orthonormal_inputs(6, 4, 2.0);
    for (double w : {0.01, 0.5, 1.0, 10.0}) CHECK(effective_dim_w(in, w) == doctest::Approx(8.0 / (1.0 + w)));
    CHECK_THROWS_AS(effective_dim_w(in, 0.0), DomainError);
}

TEST_CASE("penalty path") {
    const PenaltyInputs in = orthonormal_inputs(6, 4, 1.0);
    const PenaltyPath path = penalty_path(in, {0.1, 1.0, 10.0});
    CHECK(path.strictly_decreasing);
    CHECK(path.p_w.size() == 3);
    CHECK_THROWS_AS(penalty_path(in, {1.0, 1.0}), ValidationError);

    PenaltyInputs flat = in;
    flat.G0_sq = Mat::Zero(4, 4);
    const PenaltyPath f = penalty_path(flat, {0.1, 1.0});
    CHECK_FALSE(f.strictly_decreasing);
    CHECK(f.p_w[0] == doctest::Approx(4.0));
}

TEST_CASE("input validation") {
    PenaltyInputs in = orthonormal_inputs(6, 4, 1.0);
    in.sigma_sq = 0.0;
    CHECK_THROWS_AS(in.validate(), ValidationError);
    in.sigma_sq = 1.0;
    in.G0_sq = Mat::Identity(3, 3);
    CHECK_THROWS_AS(in.validate(), ValidationError);
    in.G0_sq = -Mat::Identity(4, 4);
    CHECK_THROWS_AS(in.validate(), ValidationError);
}

TEST_CASE("risk selection closed form") {
    // p(w) + w = σ²p/(1+w) + w is minimized at w = √(σ²p) − 1.
    const PenaltyInputs in = orthonormal_inputs(6, 4, 1.0);
    const RiskSelection s = select_w_risk(in);
    CHECK(s.w_star == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.risk == doctest::Approx(3.0).epsilon(1e-10));
    CHECK_FALSE(s.fallback_grid);
    const RiskSelection s9 = select_w_risk(orthonormal_inputs(6, 4, 2.25 * 4.0));
    CHECK(s9.w_star == doctest::Approx(5.0).epsilon(1e-6));
    CHECK_THROWS_AS(select_w_risk(in, 1.0, 0.5), DomainError);
}

TEST_CASE("risk selection against a dense grid") {
    CounterRng rng(12, 0);
    for (int i = 0; i < 10; ++i) {
        PenaltyInputs in;
        in.A = gaussian_matrix(rng, 8, 3);
        in.G0_sq = random_spd(rng, 3, 0.1, 3.0);
        in.sigma_sq = 0.5 + 3 * rng.uniform();
        const RiskSelection s = select_w_risk(in);
        double best = 1e300;
        for (int k = 0; k <= 20000; ++k) {
            const double w = std::exp(std::log(1e-6) + (std::log(1e6) - std::log(1e-6)) * k / 20000.0);
            best = std::min(best, effective_dim_w(in, w) + w);
        }
        CHECK(s.risk <= best + 1e-9);
        CHECK(s.risk >= best - 1e-3 * best);
    }
}

TEST_CASE("balance selection") {
    // w = c₀σ²p/(1+w) ⇒ w = (−1 + √(1 + 4c₀σ²p))/2
    const PenaltyInputs in = orthonormal_inputs(6, 4, 1.0);
    CHECK(select_w_balance(in, 1.0) == doctest::Approx((std::sqrt(17.0) - 1.0) / 2.0).epsilon(1e-12));
    CHECK(select_w_balance(in, 3.0) == doctest::Approx((std::sqrt(49.0) - 1.0) / 2.0).epsilon(1e-12));
    CHECK_THROWS_AS(select_w_balance(in, 0.0), DomainError);
}
