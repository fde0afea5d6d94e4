#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "calmreg/error.hpp"
#include "calmreg/semiparam.hpp"
#include "support.hpp"

using namespace calmreg;
using namespace testing_support;

namespace {

// Random PD block Hessian with ‖Dtt^{-1/2} A Hnn^{-1/2}‖ = k.
BlockHessian random_blocks(CounterRng& rng, int p, int q, double k) {
    const Mat dtt = random_spd(rng, p, 0.5, 3.0);
    const Mat hnn = random_spd(rng, q, 0.5, 3.0);
    Mat kmat = gaussian_matrix(rng, p, q);
    kmat *= k / Eigen::JacobiSVD<Mat>(kmat).singularValues()(0);
    return {dtt, sym_sqrt(dtt) * kmat * sym_sqrt(hnn), hnn};
}

double quad_value(const Mat& f, const Vec& th, const Vec& eta) {
    Vec v(th.size() + eta.size());
    v << th, eta;
    return -0.5 * v.dot(f * v);
}

}  // namespace

TEST_CASE("block split and assembly") {
    CounterRng rng(1, 0);
    const BlockHessian b = random_blocks(rng, 2, 3, 0.5);
    const Mat f = b.assemble();
    CHECK(f.rows() == 5);
    const BlockHessian s = split_blocks(f, 2);
    CHECK((s.Dtt - b.Dtt).norm() == 0.0);
    CHECK((s.A - b.A).norm() == 0.0);
    CHECK((s.Hnn - b.Hnn).norm() == 0.0);
    BlockHessian bad = b;
    bad.A = Mat::Zero(3, 3);
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    CHECK_THROWS(split_blocks(f, 6));
}

TEST_CASE("separability coefficient against a singular value oracle") {
    CounterRng rng(2, 0);
    for (int i = 0; i < 30; ++i) {
        const double k = 0.95 * rng.uniform();
        const BlockHessian b = random_blocks(rng, 3, 4, k);
        CHECK(separability_rho(b) == doctest::Approx(k * k).epsilon(1e-9));
    }
    const BlockHessian diag{Mat::Identity(2, 2), Mat::Zero(2, 2), Mat::Identity(2, 2)};
    CHECK(separability_rho(diag) == 0.0);
    BlockHessian sing = diag;
    sing.Hnn(1, 1) = 0.0;
    CHECK_THROWS(separability_rho(sing));
}

TEST_CASE("Loewner sandwich holds with the square root of rho") {
    CounterRng rng(3, 0);
    for (int i = 0; i < 50; ++i) {
        const BlockHessian b = random_blocks(rng, 2, 3, 0.9 * rng.uniform());
        const double rho = separability_rho(b);
        CHECK(sandwich_check(b.assemble(), b, std::sqrt(rho)).holds);
    }
    // Scalar blocks: F = [[1, a], [a, 1]] has eigenvalues 1 ± a while ρ = a².
    const double a = 0.5;
    const BlockHessian s{Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, a), Mat::Constant(1, 1, 1.0)};
    CHECK(separability_rho(s) == doctest::Approx(0.25));
    CHECK(sandwich_check(s.assemble(), s, 0.5).holds);
    const SandwichResult tight = sandwich_check(s.assemble(), s, 0.25);
    CHECK_FALSE(tight.holds);
    CHECK(tight.lower_min_eig == doctest::Approx(-0.25));
}

TEST_CASE("orthogonalization gives the Schur complement") {
    CounterRng rng(4, 0);
    for (int i = 0; i < 30; ++i) {
        const BlockHessian b = random_blocks(rng, 3, 2, 0.9 * rng.uniform());
        const OrthoTransform t = orthogonalize(b);
        // inverse of the θθ block of F⁻¹
        const Mat finv = b.assemble().inverse();
        const Mat oracle = finv.topLeftCorner(3, 3).inverse();
        CHECK((t.D_eff_sq - oracle).norm() <= 1e-9 * oracle.norm());
        CHECK(sym_min_eig(b.Dtt - t.D_eff_sq) >= -1e-10);
        CHECK(sym_min_eig(t.D_eff_sq - (1.0 - t.rho) * b.Dtt) >= -1e-10);
        CHECK(t.C.rows() == 2);
        CHECK(t.C.cols() == 3);
    }
}

TEST_CASE("transformed function separates a quadratic") {
    CounterRng rng(5, 0);
    const BlockHessian b = random_blocks(rng, 2, 3, 0.7);
    const Mat f = b.assemble();
    const JointFunction fn = [&](const Vec& th, const Vec& eta) { return quad_value(f, th, eta); };
    const OrthoTransform t = orthogonalize(b);
    const Vec th0 = gaussian_vector(rng, 2), eta0 = gaussian_vector(rng, 3);
    CHECK(transformed_value(fn, t.C, th0, th0, eta0) == doctest::Approx(fn(th0, eta0)));
    const Mat mixed = transformed_mixed_derivative(fn, t.C, th0, eta0);
    CHECK(mixed.cwiseAbs().maxCoeff() <= 1e-7);
    const Mat raw = transformed_mixed_derivative(fn, Mat::Zero(3, 2), th0, eta0);
    CHECK((raw + b.A).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK_THROWS_AS(transformed_mixed_derivative(fn, Mat::Zero(2, 2), th0, eta0), ValidationError);

    // centered at the origin the transformed argmax over θ does not move with τ
    std::vector<Vec> taus;
    for (int i = 0; i < 5; ++i) taus.push_back(gaussian_vector(rng, 3));
    CHECK(semiorthogonality_argmax_check(fn, t.C, Vec::Zero(2), taus) <= 1e-7);
    CHECK(semiorthogonality_argmax_check(fn, Mat::Zero(3, 2), Vec::Zero(2), taus) > 1e-3);
}

TEST_CASE("mixed derivative of a non-quadratic function") {
    // f = −cosh(θ − η₁) − ½η₂², ∂θ∂η₁ f = cosh(θ − η₁)
    const JointFunction fn = [](const Vec& th, const Vec& eta) {
        return -std::cosh(th(0) - eta(0)) - 0.5 * eta(1) * eta(1);
    };
    const Vec th = Vec::Constant(1, 0.3), eta = (Vec(2) << -0.4, 1.0).finished();
    const Mat m = transformed_mixed_derivative(fn, Mat::Zero(2, 1), th, eta);
    CHECK(m(0, 0) == doctest::Approx(std::cosh(0.7)).epsilon(1e-8));
    CHECK(std::abs(m(0, 1)) <= 1e-8);
}

TEST_CASE("partial quadratic shift") {
    CounterRng rng(6, 0);
    for (int i = 0; i < 10; ++i) {
        const BlockHessian b = random_blocks(rng, 2, 3, 0.8);
        const Mat f = b.assemble();
        const Vec dev = gaussian_vector(rng, 3);
        const NumericMax m = maximize_numeric([&](const Vec& th) { return quad_value(f, th, dev); }, Vec::Zero(2));
        CHECK((partial_quad_shift(b, dev) - m.arg).norm() <= 1e-6);
    }
}

TEST_CASE("composite separability") {
    CounterRng rng(7, 0);
    for (int i = 0; i < 20; ++i) {
        const BlockHessian b1 = random_blocks(rng, 2, 2, 0.5);
        const Mat a2 = 0.2 * gaussian_matrix(rng, 2, 3);
        const Mat h2 = random_spd(rng, 3, 1.0, 2.0);
        Mat f = Mat::Zero(7, 7);
        f.topLeftCorner(2, 2) = b1.Dtt;
        f.block(0, 2, 2, 2) = b1.A;
        f.block(2, 0, 2, 2) = b1.A.transpose();
        f.block(2, 2, 2, 2) = b1.Hnn;
        f.block(0, 4, 2, 3) = a2;
        f.block(4, 0, 3, 2) = a2.transpose();
        f.block(4, 4, 3, 3) = h2;
        const CompositeRho c = composite_rho(f, 2, 2, 3);
        CHECK(c.rho_z == doctest::Approx(separability_rho(b1)));
        CHECK(c.sum == doctest::Approx(c.rho_z + c.rho_tau));
        CHECK(c.direct <= c.sum + 1e-12);
    }
    CHECK_THROWS_AS(composite_rho(Mat::Identity(4, 4), 1, 1, 1), ValidationError);
}

TEST_CASE("semiparametric bias bound") {
    CHECK(semiparam_bias_bound(1.0, 2.0, 4.0, 9.0, 1.0) == doctest::Approx(6.0));
    CHECK(semiparam_bias_bound(0.0, 2.0, 4.0, 9.0) == 0.0);
    CHECK_THROWS_AS(semiparam_bias_bound(1.0, 1.0, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(semiparam_bias_bound(-1.0, 1.0, 1.0, 1.0), DomainError);
}

TEST_CASE("numeric maximizer") {
    auto f = [](const Vec& v) { return -std::cosh(v(0) - 1.0) - (v(1) + 2.0) * (v(1) + 2.0); };
    const NumericMax m = maximize_numeric(f, Vec::Zero(2));
    CHECK(std::abs(m.arg(0) - 1.0) <= 1e-7);
    CHECK(std::abs(m.arg(1) + 2.0) <= 1e-7);
    CHECK(m.concave_at_max);
    CHECK(m.value == doctest::Approx(-1.0));
}
