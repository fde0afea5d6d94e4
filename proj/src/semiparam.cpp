#include "calmreg/semiparam.hpp"

#include <algorithm>
#include <cmath>

#include "calmreg/error.hpp"

namespace calmreg {

namespace {

void require_pd(const Mat& m, const char* what) {
    if (m.rows() != m.cols() || m.size() == 0 || !(sym_min_eig(m) > 0.0))
        throw NumericalError(std::string(what) + " must be positive definite");
}

}  // namespace

Mat BlockHessian::assemble() const {
    const auto p = Dtt.rows(), q = Hnn.rows();
    Mat f(p + q, p + q);
    f.topLeftCorner(p, p) = Dtt;
    f.topRightCorner(p, q) = A;
    f.bottomLeftCorner(q, p) = A.transpose();
    f.bottomRightCorner(q, q) = Hnn;
    return f;
}

void BlockHessian::validate() const {
    if (Dtt.rows() != Dtt.cols() || Hnn.rows() != Hnn.cols() || A.rows() != Dtt.rows() || A.cols() != Hnn.rows())
        throw ValidationError("block Hessian: inconsistent block shapes");
    require_symmetric_psd(Dtt, "block Hessian theta-theta block");
    require_symmetric_psd(Hnn, "block Hessian eta-eta block");
}

BlockHessian split_blocks(const Mat& full, int p) {
    if (full.rows() != full.cols() || p < 1 || p >= full.rows())
        throw ValidationError("split_blocks: invalid partition");
    const auto q = full.rows() - p;
    return {full.topLeftCorner(p, p), full.topRightCorner(p, q), full.bottomRightCorner(q, q)};
}

double separability_rho(const BlockHessian& b) {
    b.validate();
    require_pd(b.Dtt, "separability: theta-theta block");
    require_pd(b.Hnn, "separability: eta-eta block");
    const Mat dinv = sym_inv_sqrt(b.Dtt);
    const Mat m = dinv * b.A * spd_solve(b.Hnn, b.A.transpose(), "separability") * dinv;
    return std::max(0.0, sym_max_eig(m));
}

SandwichResult sandwich_check(const Mat& full, const BlockHessian& b, double rho) {
    BlockHessian diag{b.Dtt, Mat::Zero(b.A.rows(), b.A.cols()), b.Hnn};
    const Mat bd = diag.assemble();
    SandwichResult r;
    r.lower_min_eig = sym_min_eig(full - (1.0 - rho) * bd);
    r.upper_min_eig = sym_min_eig((1.0 + rho) * bd - full);
    const double tol = 1e-10 * std::max(1.0, bd.cwiseAbs().maxCoeff());
    r.holds = r.lower_min_eig >= -tol && r.upper_min_eig >= -tol;
    return r;
}

OrthoTransform orthogonalize(const BlockHessian& b) {
    b.validate();
    require_pd(b.Hnn, "orthogonalize: eta-eta block");
    OrthoTransform t;
    t.C = spd_solve(b.Hnn, b.A.transpose(), "orthogonalize");
    t.D_eff_sq = symmetrize(b.Dtt - b.A * t.C);
    t.rho = separability_rho(b);
    return t;
}

double transformed_value(const JointFunction& f, const Mat& C, const Vec& theta_ref, const Vec& theta,
                         const Vec& tau) {
    return f(theta, tau - C * (theta - theta_ref));
}

Mat transformed_mixed_derivative(const JointFunction& f, const Mat& C, const Vec& theta_ref, const Vec& eta_ref,
                                 double step) {
    const auto p = theta_ref.size(), q = eta_ref.size();
    if (C.rows() != q || C.cols() != p) throw ValidationError("mixed derivative: C must be q x p");
    const double scale = std::max(theta_ref.cwiseAbs().maxCoeff(), eta_ref.cwiseAbs().maxCoeff());
    const double h = step > 0 ? step : 2e-4 * (1.0 + scale);
    auto central = [&](double hh) {
        Mat out(p, q);
        for (Eigen::Index i = 0; i < p; ++i) {
            Vec tp = theta_ref, tm = theta_ref;
            tp(i) += hh;
            tm(i) -= hh;
            for (Eigen::Index j = 0; j < q; ++j) {
                Vec ep = eta_ref, em = eta_ref;
                ep(j) += hh;
                em(j) -= hh;
                const double fpp = transformed_value(f, C, theta_ref, tp, ep);
                const double fpm = transformed_value(f, C, theta_ref, tp, em);
                const double fmp = transformed_value(f, C, theta_ref, tm, ep);
                const double fmm = transformed_value(f, C, theta_ref, tm, em);
                out(i, j) = (fpp - fpm - fmp + fmm) / (4.0 * hh * hh);
            }
        }
        return out;
    };
    // Richardson step removes the O(h²) term.
    const Mat coarse = central(h);
    const Mat fine = central(0.5 * h);
    return (4.0 * fine - coarse) / 3.0;
}

NumericMax maximize_numeric(const std::function<double(const Vec&)>& f, const Vec& start, int max_iter) {
    const auto d = start.size();
    auto gradient = [&](const Vec& x) {
        const double h = 1e-5 * (1.0 + x.norm());
        Vec g(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            Vec a = x, b = x;
            a(i) += h;
            b(i) -= h;
            g(i) = (f(a) - f(b)) / (2.0 * h);
        }
        return g;
    };
    auto hessian = [&](const Vec& x) {
        const double h = 1e-4 * (1.0 + x.norm());
        Mat hm(d, d);
        for (Eigen::Index j = 0; j < d; ++j) {
            Vec a = x, b = x;
            a(j) += h;
            b(j) -= h;
            hm.col(j) = (gradient(a) - gradient(b)) / (2.0 * h);
        }
        return symmetrize(hm);
    };
    NumericMax r;
    r.arg = start;
    r.value = f(start);
    for (int it = 0; it < max_iter; ++it) {
        const Vec g = gradient(r.arg);
        const Mat hm = hessian(r.arg);
        Eigen::LLT<Mat> llt(-hm);
        const Vec step = llt.info() == Eigen::Success ? Vec(llt.solve(g)) : Vec(g);
        r.iterations = it + 1;
        if (step.norm() <= 1e-13 * (1.0 + r.arg.norm())) break;
        double alpha = 1.0;
        bool moved = false;
        for (int k = 0; k < 50; ++k, alpha *= 0.5) {
            const Vec cand = r.arg + alpha * step;
            const double v = f(cand);
            if (std::isfinite(v) && v >= r.value - 1e-15 * (1.0 + std::abs(r.value))) {
                moved = (cand - r.arg).norm() > 0.0;
                r.arg = cand;
                r.value = v;
                break;
            }
        }
        if (!moved) break;
    }
    r.grad_norm = gradient(r.arg).norm();
    r.concave_at_max = sym_max_eig(hessian(r.arg)) < 0.0;
    return r;
}

double semiorthogonality_argmax_check(const JointFunction& f, const Mat& C, const Vec& theta_ref,
                                      const std::vector<Vec>& tau_samples) {
    double worst = 0.0;
    for (const Vec& tau : tau_samples) {
        auto inner = [&](const Vec& th) { return transformed_value(f, C, theta_ref, th, tau); };
        const NumericMax m = maximize_numeric(inner, theta_ref);
        if (!m.concave_at_max) throw NumericalError("semiorthogonality check: inner objective not concave");
        worst = std::max(worst, (m.arg - theta_ref).norm());
    }
    return worst;
}

double semiparam_bias_bound(double c3, double r_bar, double n_eff, double quadform, double nu) {
    if (!(c3 >= 0) || !(r_bar >= 0) || !(n_eff > 0) || !(quadform >= 0) || !(nu > 0))
        throw DomainError("semiparam_bias_bound: arguments out of range");
    return c3 / (nu * nu) * r_bar * r_bar / std::sqrt(n_eff) * std::sqrt(quadform);
}

CompositeRho composite_rho(const Mat& full, int p, int q1, int q2) {
    if (full.rows() != p + q1 + q2 || full.cols() != full.rows() || p < 1 || q1 < 1 || q2 < 1)
        throw ValidationError("composite_rho: partition does not match the matrix");
    const Mat ftt = full.topLeftCorner(p, p);
    CompositeRho r;
    r.rho_z = separability_rho({ftt, full.block(0, p, p, q1), full.block(p, p, q1, q1)});
    r.rho_tau = separability_rho({ftt, full.block(0, p + q1, p, q2), full.block(p + q1, p + q1, q2, q2)});
    r.sum = r.rho_z + r.rho_tau;
    r.direct = separability_rho(split_blocks(full, p));
    return r;
}

Vec partial_quad_shift(const BlockHessian& b, const Vec& eta_dev) {
    if (eta_dev.size() != b.A.cols()) throw ValidationError("partial_quad_shift: deviation has wrong length");
    require_pd(b.Dtt, "partial_quad_shift: theta-theta block");
    return -spd_solve(b.Dtt, b.A * eta_dev, "partial_quad_shift");
}

}  // namespace calmreg
