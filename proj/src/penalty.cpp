#include "calmreg/penalty.hpp"

#include <algorithm>
#include <cmath>

#include "calmreg/error.hpp"

namespace calmreg {

namespace {

constexpr int kCoarse = 65;
constexpr int kDense = 4097;
constexpr int kMaxGolden = 200;

}  // namespace

void PenaltyInputs::validate() const {
    if (A.cols() != G0_sq.rows() || G0_sq.rows() != G0_sq.cols())
        throw ValidationError("penalty inputs: A must be q x p and G0^2 p x p");
    require_symmetric_psd(G0_sq, "penalty G0^2");
    if (!(sigma_sq > 0.0)) throw ValidationError("penalty inputs: sigma^2 must be > 0");
}

double effective_dim_w(const PenaltyInputs& in, double w) {
    if (!(w > 0.0)) throw DomainError("effective_dim_w: w must be > 0");
    const Mat ata = in.A.transpose() * in.A;
    const Mat reg = ata + w * in.G0_sq;
    return in.sigma_sq * spd_solve(reg, ata, "effective_dim_w").trace();
}

PenaltyPath penalty_path(const PenaltyInputs& in, const std::vector<double>& w_grid) {
    in.validate();
    PenaltyPath path;
    path.w_grid = w_grid;
    for (double w : w_grid) path.p_w.push_back(effective_dim_w(in, w));
    path.strictly_decreasing = true;
    for (std::size_t i = 1; i < w_grid.size(); ++i) {
        if (!(w_grid[i] > w_grid[i - 1])) throw ValidationError("penalty path: w grid must be strictly increasing");
        if (!(path.p_w[i] < path.p_w[i - 1])) path.strictly_decreasing = false;
    }
    return path;
}

RiskSelection select_w_risk(const PenaltyInputs& in, double lo, double hi) {
    in.validate();
    if (!(lo > 0.0) || !(hi > lo)) throw DomainError("select_w_risk: need 0 < lo < hi");
    auto risk = [&](double logw) {
        const double w = std::exp(logw);
        return effective_dim_w(in, w) + w;
    };
    const double a = std::log(lo), b = std::log(hi);
    auto scan = [&](int n, int& best, std::vector<double>& xs, std::vector<double>& fs) {
        xs.resize(n);
        fs.resize(n);
        best = 0;
        for (int i = 0; i < n; ++i) {
            xs[i] = a + (b - a) * i / (n - 1);
            fs[i] = risk(xs[i]);
            if (fs[i] < fs[best]) best = i;
        }
    };
    std::vector<double> xs, fs;
    int best = 0;
    scan(kCoarse, best, xs, fs);
    RiskSelection sel;
    // Unimodal on the grid: nonincreasing up to the minimum, nondecreasing after.
    for (int i = 1; i < kCoarse; ++i) {
        const bool bad = i <= best ? fs[i] > fs[i - 1] : fs[i] < fs[i - 1];
        if (bad) sel.fallback_grid = true;
    }
    if (sel.fallback_grid) scan(kDense, best, xs, fs);
    const int n = static_cast<int>(xs.size());
    double l = xs[std::max(best - 1, 0)], r = xs[std::min(best + 1, n - 1)];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = r - phi * (r - l), d = l + phi * (r - l);
    double fc = risk(c), fd = risk(d);
    for (int it = 0; it < kMaxGolden && (r - l) > 1e-12; ++it) {
        if (fc <= fd) {
            r = d;
            d = c;
            fd = fc;
            c = r - phi * (r - l);
            fc = risk(c);
        } else {
            l = c;
            c = d;
            fc = fd;
            d = l + phi * (r - l);
            fd = risk(d);
        }
    }
    const double x = 0.5 * (l + r);
    sel.w_star = std::exp(x);
    sel.risk = risk(x);
    return sel;
}

double select_w_balance(const PenaltyInputs& in, double c0) {
    in.validate();
    if (!(c0 > 0.0)) throw DomainError("select_w_balance: c0 must be > 0");
    auto h = [&](double w) { return w - c0 * effective_dim_w(in, w); };
    double lo = 1e-12;
    if (h(lo) >= 0.0) return lo;
    double hi = std::max(1.0, 2.0 * c0 * in.sigma_sq * static_cast<double>(in.A.cols()));
    while (h(hi) <= 0.0) hi *= 2.0;
    for (int it = 0; it < 400 && (hi - lo) > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (h(mid) <= 0.0) lo = mid; else hi = mid;
    }
    return lo;
}

}  // namespace calmreg
