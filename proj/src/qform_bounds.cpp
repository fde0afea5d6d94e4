#include "calmreg/qform_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "calmreg/error.hpp"

namespace calmreg {

namespace {

constexpr double kStatsTol = 1e-10;
constexpr double kXcLo = 1e-6;
constexpr double kXcHi = 1e8;
constexpr double kXcTol = 1e-8;
constexpr int kXcMaxIter = 200;

}  // namespace

double SpectrumStats::v() const { return std::sqrt(v2); }

void SpectrumStats::validate() const {
    if (!std::isfinite(dim_a) || !std::isfinite(v2) || !std::isfinite(b_norm))
        throw ValidationError("spectrum stats: non-finite field");
    if (dim_a < 0 || v2 < 0 || b_norm < 0)
        throw ValidationError("spectrum stats: negative field");
    const double tol = kStatsTol * std::max(1.0, dim_a);
    if (b_norm > dim_a + tol) throw ValidationError("spectrum stats: b_norm > dim_a");
    if (b_norm * b_norm > v2 + tol * std::max(1.0, v2))
        throw ValidationError("spectrum stats: b_norm^2 > v2");
    if (v2 > b_norm * dim_a + tol * std::max(1.0, v2))
        throw ValidationError("spectrum stats: v2 > b_norm * dim_a");
    if (dim_a > 0 && b_norm <= 0) throw ValidationError("spectrum stats: dim_a > 0 but b_norm = 0");
}

SpectrumStats make_stats(double dim_a, double v2, double b_norm) {
    SpectrumStats s{dim_a, v2, b_norm};
    s.validate();
    return s;
}

SpectrumStats spectrum_stats(const Mat& b) {
    require_symmetric_psd(b, "spectrum_stats", kStatsTol);
    Vec lam = sym_eigenvalues(b).cwiseMax(0.0);
    SpectrumStats s;
    s.dim_a = lam.sum();
    s.v2 = lam.squaredNorm();
    s.b_norm = lam.size() ? lam.maxCoeff() : 0.0;
    return s;
}

SpectrumStats identity_stats(double d) { return make_stats(d, d, d > 0 ? 1.0 : 0.0); }

ZQuantile z_quantile(const SpectrumStats& s, double x) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("z_quantile: x must be >= 0");
    ZQuantile q;
    q.z_sq = s.dim_a + 2.0 * std::sqrt(x * s.v2) + 2.0 * x * s.b_norm;
    q.z = std::sqrt(s.dim_a) + std::sqrt(2.0 * x * s.b_norm);
    return q;
}

double exp_moment_bound(const SpectrumStats& s, double mu) {
    if (!(mu > 0.0) || !(mu * s.b_norm < 1.0))
        throw DomainError("exp_moment_bound: mu must lie in (0, 1/b_norm)");
    return std::exp(mu * mu * s.v2 / (4.0 * (1.0 - s.b_norm * mu)) + mu * s.dim_a / 2.0);
}

double gaussian_det_moment(const Mat& b, double mu) {
    require_symmetric_psd(b, "gaussian_det_moment", kStatsTol);
    const Vec lam = sym_eigenvalues(b).cwiseMax(0.0);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        const double f = 1.0 - mu * lam(i);
        if (!(f > 0.0)) throw DomainError("gaussian_det_moment: mu * ||B|| must be < 1");
        log_det += std::log(f);
    }
    return std::exp(-0.5 * log_det);
}

double mu_of_x(const SpectrumStats& s, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("mu_of_x: x must be > 0");
    return 1.0 / (1.0 + s.v() / (2.0 * std::sqrt(x)));
}

double xc_lhs(double g, const SpectrumStats& s, double x) {
    const double mu = mu_of_x(s, x);
    return (g - std::sqrt(s.dim_a * mu)) / mu;
}

double xc_rhs(const SpectrumStats& s, double x) { return z_quantile(s, x).z + 1.0; }

ExpTailSolution solve_xc(double g, const SpectrumStats& s) {
    s.validate();
    if (std::abs(s.b_norm - 1.0) > 1e-10)
        throw ValidationError("solve_xc: stats must be normalized to b_norm = 1");
    if (!(g > std::sqrt(s.dim_a))) throw ValidationError("solve_xc: g must exceed sqrt(dim_a)");
    auto h = [&](double x) { return xc_lhs(g, s, x) - xc_rhs(s, x); };
    double lo = kXcLo, hi = kXcHi;
    double hlo = h(lo), hhi = h(hi);
    if (!(hlo > 0.0) || !(hhi < 0.0))
        throw DomainError("solve_xc: no crossover on [1e-6, 1e8] (g too small or too large)");
    ExpTailSolution sol;
    sol.g = g;
    double x = lo;
    for (int it = 1; it <= kXcMaxIter; ++it) {
        x = 0.5 * (lo + hi);
        const double hx = h(x);
        sol.iterations = it;
        if (hx > 0.0) lo = x; else hi = x;
        if (std::abs(hx) <= kXcTol && (hi - lo) <= 1e-12 * x) break;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * x) break;
    }
    sol.x_c = x;
    sol.residual = std::abs(h(x));
    if (sol.residual > kXcTol) throw NumericalError("solve_xc: residual above tolerance");
    const double dx = 1e-3 * x;
    if (!(xc_lhs(g, s, x - dx) > xc_lhs(g, s, x + dx)) || !(xc_rhs(s, x - dx) < xc_rhs(s, x + dx)))
        throw NumericalError("solve_xc: monotonicity check failed across the final bracket");
    sol.mu_c = mu_of_x(s, x);
    sol.g_c = g - std::sqrt(s.dim_a * sol.mu_c);
    return sol;
}

double g_for_crossover(const SpectrumStats& s, double x_target) {
    const double mu = mu_of_x(s, x_target);
    return mu * xc_rhs(s, x_target) + std::sqrt(s.dim_a * mu);
}

TailBranch zc_branch(const ExpTailSolution& sol, double x) {
    return x <= sol.x_c ? TailBranch::gaussian : TailBranch::exponential;
}

double zc_quantile(const ExpTailSolution& sol, const SpectrumStats& s, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("zc_quantile: x must be > 0");
    if (zc_branch(sol, x) == TailBranch::gaussian)
        return std::sqrt(s.dim_a + 2.0 * s.v() * std::sqrt(x) + 2.0 * x);
    return sol.g_c / sol.mu_c + 2.0 * (x - sol.x_c) / sol.g_c;
}

double min_g_for_gaussian_regime(const SpectrumStats& s, double x) {
    if (!(x > 0.0)) throw DomainError("min_g_for_gaussian_regime: x must be > 0");
    return std::sqrt(x) / 2.0 + std::pow(s.dim_a * x / 4.0, 0.25);
}

LowerTail lower_tail_threshold(const SpectrumStats& s, double x) {
    if (!(x > 0.0)) throw DomainError("lower_tail_threshold: x must be > 0");
    LowerTail lt;
    lt.threshold = s.dim_a - 2.0 * std::sqrt(x * s.v2);
    lt.vacuous = lt.threshold <= 0.0;
    return lt;
}

}  // namespace calmreg
