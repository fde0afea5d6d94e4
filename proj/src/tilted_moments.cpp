#include "calmreg/tilted_moments.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numeric>
#include <string>

#include "calmreg/error.hpp"
#include "calmreg/qform_bounds.hpp"

namespace calmreg {

namespace {

constexpr double kMaxExponent = 700.0;
constexpr double kLawTol = 1e-10;

void check_discrete(const ScalarLaw& law) {
    if (law.points.size() != law.weights.size() || law.points.empty())
        throw ValidationError("scalar law: points and weights must be nonempty and equal length");
    double total = 0.0, mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < law.points.size(); ++i) {
        if (!(law.weights[i] >= 0.0) || !std::isfinite(law.points[i]))
            throw ValidationError("scalar law: negative weight or non-finite point");
        total += law.weights[i];
        mean += law.weights[i] * law.points[i];
    }
    if (std::abs(total - 1.0) > kLawTol) throw ValidationError("scalar law: weights do not sum to 1");
    if (std::abs(mean) > kLawTol) throw ValidationError("scalar law: mean is not zero");
    for (std::size_t i = 0; i < law.points.size(); ++i)
        var += law.weights[i] * law.points[i] * law.points[i];
    if (var > 1.0 + kLawTol) throw ValidationError("scalar law: variance exceeds 1");
}

Cumulants discrete_cumulants(const ScalarLaw& law, double t) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < law.points.size(); ++i) {
        if (law.weights[i] <= 0.0) continue;
        const double e = t * law.points[i];
        if (std::abs(e) > kMaxExponent) throw DomainError("tilted_cumulants: exponent overflow");
        top = std::max(top, e);
    }
    double z = 0.0, m = 0.0;
    std::vector<double> w(law.points.size());
    for (std::size_t i = 0; i < law.points.size(); ++i) {
        w[i] = law.weights[i] > 0.0 ? law.weights[i] * std::exp(t * law.points[i] - top) : 0.0;
        z += w[i];
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] /= z;
        m += w[i] * law.points[i];
    }
    double c2 = 0.0, c3 = 0.0, c4 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = law.points[i] - m;
        const double d2 = d * d;
        c2 += w[i] * d2;
        c3 += w[i] * d2 * d;
        c4 += w[i] * d2 * d2;
    }
    Cumulants c;
    c.phi = top + std::log(z);
    c.d1 = m;
    c.d2 = c2;
    c.d3 = c3;
    c.d4 = c4 - 3.0 * c2 * c2;
    return c;
}

}  // namespace

ScalarLaw gaussian_law(double variance) {
    if (!(variance > 0.0) || variance > 1.0 + kLawTol)
        throw ValidationError("gaussian law: variance must lie in (0, 1]");
    ScalarLaw law;
    law.kind = LawKind::gaussian;
    law.variance = variance;
    return law;
}

ScalarLaw rademacher_law() {
    ScalarLaw law;
    law.kind = LawKind::rademacher;
    law.points = {-1.0, 1.0};
    law.weights = {0.5, 0.5};
    law.variance = 1.0;
    return law;
}

ScalarLaw centered_uniform_law() {
    using Rule = boost::math::quadrature::gauss<double, 64>;
    const double a = std::sqrt(3.0);
    ScalarLaw law;
    law.kind = LawKind::centered_uniform;
    const auto& nodes = Rule::abscissa();
    const auto& wts = Rule::weights();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        law.points.push_back(a * nodes[i]);
        law.weights.push_back(wts[i] / 2.0);
        law.points.push_back(-a * nodes[i]);
        law.weights.push_back(wts[i] / 2.0);
    }
    const double total = std::accumulate(law.weights.begin(), law.weights.end(), 0.0);
    for (double& w : law.weights) w /= total;
    law.variance = 1.0;
    return law;
}

ScalarLaw tabulated_law(std::vector<double> points, std::vector<double> weights) {
    ScalarLaw law;
    law.kind = LawKind::tabulated;
    law.points = std::move(points);
    law.weights = std::move(weights);
    check_discrete(law);
    double var = 0.0;
    for (std::size_t i = 0; i < law.points.size(); ++i)
        var += law.weights[i] * law.points[i] * law.points[i];
    law.variance = var;
    return law;
}

ScalarLaw tabulated_density(const std::vector<double>& grid, const std::vector<double>& density) {
    if (grid.size() != density.size() || grid.size() < 2)
        throw ValidationError("tabulated density: grid and density must match, size >= 2");
    std::vector<double> w(grid.size(), 0.0);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double h = grid[i + 1] - grid[i];
        if (!(h > 0.0)) throw ValidationError("tabulated density: grid must be strictly increasing");
        w[i] += 0.5 * h * density[i];
        w[i + 1] += 0.5 * h * density[i + 1];
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(total > 0.0)) throw ValidationError("tabulated density: zero total mass");
    for (double& v : w) v /= total;
    double mean = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) mean += w[i] * grid[i];
    std::vector<double> pts(grid);
    if (std::abs(mean) > kLawTol)
        for (double& x : pts) x -= mean;
    return tabulated_law(std::move(pts), std::move(w));
}

Cumulants tilted_cumulants(const ScalarLaw& law, double t) {
    if (!std::isfinite(t)) throw DomainError("tilted_cumulants: t must be finite");
    switch (law.kind) {
        case LawKind::gaussian: {
            Cumulants c;
            c.phi = law.variance * t * t / 2.0;
            c.d1 = law.variance * t;
            c.d2 = law.variance;
            return c;
        }
        case LawKind::rademacher: {
            if (std::abs(t) > kMaxExponent) throw DomainError("tilted_cumulants: exponent overflow");
            const double th = std::tanh(t);
            const double s2 = 1.0 - th * th;
            Cumulants c;
            // log cosh t = |t| + log1p(e^{−2|t|}) − log 2, stable for large |t|
            c.phi = std::abs(t) + std::log1p(std::exp(-2.0 * std::abs(t))) - std::log(2.0);
            c.d1 = th;
            c.d2 = s2;
            c.d3 = -2.0 * s2 * th;
            c.d4 = 4.0 * s2 * th * th - 2.0 * s2 * s2;
            return c;
        }
        case LawKind::centered_uniform:
        case LawKind::tabulated:
            return discrete_cumulants(law, t);
    }
    throw ValidationError("tilted_cumulants: unknown law");
}

TiltedSummary tau34(const ScalarLaw& law, double g, int grid_size) {
    if (!(g > 0.0)) throw DomainError("tau34: g must be > 0");
    if (grid_size < 64) throw DomainError("tau34: grid_size must be >= 64");
    TiltedSummary s;
    s.g = g;
    s.subg_const = tilted_cumulants(law, 0.0).d2;
    for (int k = 0; k <= grid_size; ++k) {
        const double t = g * k / grid_size;
        const Cumulants c = tilted_cumulants(law, t);
        s.tau3 = std::max(s.tau3, std::abs(c.d3));
        s.tau4 = std::max(s.tau4, std::abs(c.d4));
        if (k > 0) {
            s.subg_const = std::max(s.subg_const, 2.0 * c.phi / (t * t));
            s.subg_const = std::max(s.subg_const, 2.0 * tilted_cumulants(law, -t).phi / (t * t));
        }
    }
    return s;
}

TauPair iid_tau_scaling(double tau3_one, double tau4_one, long long n) {
    if (n < 1) throw DomainError("iid_tau_scaling: n must be >= 1");
    return {tau3_one / std::sqrt(static_cast<double>(n)), tau4_one / static_cast<double>(n)};
}

SharpTerms sharp_bound_terms(double kdens, double dim_q, double mu, double g, double tau3,
                             double tau4) {
    if (!(kdens > 0.0) || !(dim_q > 0.0) || !(mu > 0.0) || !(mu < 1.0) || !(g > 0.0) ||
        !(tau3 >= 0.0) || !(tau4 >= 0.0))
        throw DomainError("sharp_bound_terms: arguments out of range");
    std::string unmet;
    if (kdens * mu > 1.0 / 3.0) unmet += " C*mu <= 1/3;";
    if (g * g / mu < 9.0 * kdens * dim_q) unmet += " g^2/mu >= 9*C*dim_q;";
    SharpTerms r;
    r.omega = g * tau3 / 2.0;
    if (r.omega > 1.0 / 3.0) unmet += " g*tau3/2 <= 1/3;";
    if (!unmet.empty()) throw DomainError("sharp_bound_terms: preconditions unmet:" + unmet);

    const double root = std::sqrt(g * g / (kdens * mu)) - std::sqrt(dim_q);
    r.x_mu = 0.25 * root * root;
    r.eps_mu = kdens * mu + kdens * mu * std::sqrt(dim_q / r.x_mu);
    const double om = 1.0 - r.omega;
    r.diamond4 = (tau3 * tau3 * std::pow(mu, 3) * std::pow(dim_q + 2.0, 3) / std::pow(1.0 - mu, 3) +
                  2.0 * tau4 * mu * mu * std::pow(dim_q + 1.0, 2) / std::pow(1.0 - mu, 2)) /
                 (16.0 * om * om);

    // Tail of ‖Qγ‖² beyond (1−μ)g²/μ, bounded by e^{−x*} where x* inverts the
    // quantile dim + 2√(x dim) + 2x (‖Q‖ ≤ 1).
    const double level = (1.0 - mu) * g * g / mu;
    double x_star = 0.0;
    if (level > dim_q) {
        const double s = (-std::sqrt(dim_q) + std::sqrt(2.0 * level - dim_q)) / 2.0;
        x_star = s * s;
    }
    r.rho_mu = std::exp(-x_star);
    r.delta_mu = r.diamond4 + r.rho_mu +
                 std::exp(kdens * mu * dim_q / 2.0 - (1.0 - r.eps_mu) * r.x_mu) / (1.0 - r.eps_mu);
    return r;
}

double iid_delta_bound(double x, double dim_q, long long n, double c_scale) {
    if (n < 1) throw DomainError("iid_delta_bound: n must be >= 1");
    return c_scale * std::pow(x, 1.5) * std::pow(dim_q, 1.5) / static_cast<double>(n);
}

}  // namespace calmreg
