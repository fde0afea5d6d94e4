#include "calmreg/quad_oracle.hpp"

#include <cmath>

#include "calmreg/error.hpp"
#include "calmreg/semiparam.hpp"

namespace calmreg {

double QuadObjective::operator()(const Vec& u) const {
    const Vec d = u - center;
    return value0 - 0.5 * d.dot(F * d);
}

void QuadObjective::validate() const {
    if (F.rows() != center.size()) throw ValidationError("quadratic objective: F and center disagree");
    require_symmetric_psd(F, "quadratic objective F");
}

ShiftGain linear_perturb_shift(const QuadObjective& q, const Vec& a) {
    q.validate();
    if (a.size() != q.center.size()) throw ValidationError("linear_perturb_shift: A has wrong length");
    ShiftGain r;
    r.shift = spd_solve(q.F, a, "linear_perturb_shift");
    r.gain = 0.5 * a.dot(r.shift);
    return r;
}

ShiftGain quad_penalty_bias(const QuadObjective& q, const Mat& g_sq) {
    q.validate();
    require_symmetric_psd(g_sq, "quad_penalty_bias G^2");
    const Vec pen = g_sq * q.center;
    ShiftGain r;
    r.shift = -spd_solve(q.F + g_sq, pen, "quad_penalty_bias");
    r.gain = -0.5 * pen.dot(r.shift);
    return r;
}

FisherWilksBrackets fisher_wilks_brackets(double omega, double xi_norm) {
    if (!(omega >= 0.0) || !(omega < 1.0)) throw DomainError("fisher_wilks_brackets: omega must lie in [0, 1)");
    if (!(xi_norm >= 0.0)) throw DomainError("fisher_wilks_brackets: xi_norm must be >= 0");
    const double x2 = xi_norm * xi_norm;
    FisherWilksBrackets b;
    b.wilks_lo = -omega / (1.0 + omega) * x2;
    b.wilks_hi = omega / (1.0 - omega) * x2;
    b.fisher_resid = std::sqrt(3.0 * omega) / (1.0 - omega) * xi_norm;
    b.norm_hi = (1.0 + std::sqrt(2.0 * omega)) / (1.0 - omega) * xi_norm;
    b.fisher_valid = omega <= 1.0 / 3.0;
    return b;
}

ConcentrationCheck concentration_check(const std::function<double(const Vec&)>& g, const QuadObjective& q,
                                       const Vec& a, double nu, double r) {
    q.validate();
    if (!(nu > 0.0) || !(r > 0.0)) throw DomainError("concentration_check: nu and r must be > 0");
    ConcentrationCheck c;
    c.precondition = std::sqrt(a.dot(Vec(spd_solve(q.F, a, "concentration_check")))) <= nu * r * (1.0 + 1e-12);
    const NumericMax m = maximize_numeric([&](const Vec& u) { return g(u) + a.dot(u); }, q.center);
    const Vec d = m.arg - q.center;
    c.radius = std::sqrt(std::max(0.0, d.dot(q.F * d)));
    c.holds = c.radius <= r * (1.0 + 1e-8);
    return c;
}

}  // namespace calmreg
