#include "calmreg/calming.hpp"

#include <cmath>
#include <limits>

#include "calmreg/error.hpp"

namespace calmreg {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;

double penalty_quad(const CalmedProblem& prob, const Vec& theta) { return theta.dot(prob.G_sq * theta); }

// P(a) − P(b), arranged to avoid cancellation between two large objectives.
double profile_objective_diff(const CalmedProblem& prob, const Vec& a, const Vec& b) {
    const Vec ma = prob.smoother.phi * prob.model->value(a);
    const Vec mb = prob.smoother.phi * prob.model->value(b);
    return (mb - ma).dot(2.0 * prob.Z - ma - mb) + 2.0 * (a - b).dot(prob.G_sq * (a + b));
}

Mat normal_matrix(const Mat& dmbar, const Mat& pen) {
    Mat n = dmbar * dmbar.transpose() + pen;
    const double lmin = sym_min_eig(n);
    if (!(lmin > 1e-12 * std::max(n.trace(), 1e-300)))
        throw NumericalError("normal matrix is singular (min eigenvalue " + std::to_string(lmin) + ")");
    return n;
}

}  // namespace

void CalmedProblem::validate() const {
    if (!model) throw ValidationError("calmed problem: missing model");
    if (smoother.phi.cols() != model->n())
        throw ValidationError("calmed problem: smoother columns must equal the observation dimension");
    if (G_sq.rows() != model->p() || G_sq.cols() != model->p())
        throw ValidationError("calmed problem: penalty must be p x p");
    require_symmetric_psd(G_sq, "calmed problem penalty");
    if (Z.size() != smoother.q()) throw ValidationError("calmed problem: Z must have length q");
    if (local.theta0.size() != model->p()) throw ValidationError("calmed problem: local set has wrong dimension");
}

double extended_loglik(const CalmedProblem& prob, const ExtendedPoint& pt) {
    const Vec mbar = prob.smoother.phi * prob.model->value(pt.theta);
    return -0.5 * (prob.Z - pt.eta).squaredNorm() - 0.5 * (mbar - pt.eta).squaredNorm() -
           0.5 * penalty_quad(prob, pt.theta);
}

Vec extended_gradient(const CalmedProblem& prob, const ExtendedPoint& pt) {
    const SmoothedMap sm = smoothed_map(*prob.model, prob.smoother, pt.theta);
    Vec g(prob.p() + prob.q());
    g.head(prob.p()) = sm.dmbar * (pt.eta - sm.mbar) - prob.G_sq * pt.theta;
    g.tail(prob.q()) = (prob.Z - pt.eta) + (sm.mbar - pt.eta);
    return g;
}

Vec eta_partial(const CalmedProblem& prob, const Vec& theta) {
    return 0.5 * (prob.Z + prob.smoother.phi * prob.model->value(theta));
}

double profile_objective(const CalmedProblem& prob, const Vec& theta) {
    const Vec mbar = prob.smoother.phi * prob.model->value(theta);
    return (prob.Z - mbar).squaredNorm() + 2.0 * penalty_quad(prob, theta);
}

Vec profile_gradient(const CalmedProblem& prob, const Vec& theta) {
    const SmoothedMap sm = smoothed_map(*prob.model, prob.smoother, theta);
    return -2.0 * sm.dmbar * (prob.Z - sm.mbar) + 4.0 * prob.G_sq * theta;
}

double profile_loglik(const CalmedProblem& prob, const Vec& theta) {
    return -0.5 * profile_objective(prob, theta);
}

Vec gauss_newton_step(const CalmedProblem& prob, const Vec& theta) {
    const SmoothedMap sm = smoothed_map(*prob.model, prob.smoother, theta);
    const Mat n = normal_matrix(sm.dmbar, 2.0 * prob.G_sq);
    const Vec rhs = sm.dmbar * (prob.Z - sm.mbar) - 2.0 * prob.G_sq * theta;
    return theta + spd_solve(n, rhs, "gauss_newton_step");
}

FitResult fit_profile(const CalmedProblem& prob, const Vec& theta_init, const FitOptions& opt) {
    prob.validate();
    if (opt.require_local && !prob.local.contains(theta_init))
        throw DomainError("fit_profile: initial point outside the local set");
    FitResult r;
    r.theta = theta_init;
    double obj = profile_objective(prob, r.theta);
    if (!std::isfinite(obj)) throw NumericalError("fit_profile: non-finite objective at start");
    r.trace.push_back(obj);
    const double gtol = opt.tol * (1.0 + prob.Z.norm());
    for (int it = 0; it < opt.max_iter; ++it) {
        const Vec g = profile_gradient(prob, r.theta);
        r.grad_norm = g.norm();
        if (r.grad_norm <= gtol) {
            r.converged = true;
            break;
        }
        const Vec d = gauss_newton_step(prob, r.theta) - r.theta;
        const double slope = g.dot(d);
        double alpha = 1.0;
        bool accepted = false;
        // Near the optimum the decrease drowns in rounding and halving would
        // stall; there the full step is judged by the gradient norm instead.
        if (std::abs(slope) <= 1e-12 * (1.0 + std::abs(obj))) {
            const Vec cand = r.theta + d;
            const double val = profile_objective(prob, cand);
            if (std::isfinite(val) && profile_gradient(prob, cand).norm() < r.grad_norm) {
                r.theta = cand;
                obj = val;
                accepted = true;
            }
        }
        for (int h = 0; !accepted && h < kMaxHalvings; ++h, alpha *= 0.5) {
            const Vec cand = r.theta + alpha * d;
            const double val = profile_objective(prob, cand);
            if (std::isfinite(val) && val <= obj + kArmijo * alpha * slope) {
                r.theta = cand;
                obj = val;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        r.trace.push_back(obj);
        r.iterations = it + 1;
    }
    r.grad_norm = profile_gradient(prob, r.theta).norm();
    r.converged = r.grad_norm <= gtol;
    r.eta = eta_partial(prob, r.theta);
    return r;
}

FitResult fit_joint(const CalmedProblem& prob, const ExtendedPoint& init, FitOptions opt) {
    prob.validate();
    if (opt.require_local && !prob.local.contains(init.theta))
        throw DomainError("fit_joint: initial point outside the local set");
    FitResult r;
    ExtendedPoint pt = init;
    r.trace.push_back(-extended_loglik(prob, pt));
    const double gtol = opt.tol * (1.0 + prob.Z.norm());
    for (int it = 0; it < opt.max_iter; ++it) {
        if (extended_gradient(prob, pt).norm() <= gtol) break;
        pt.eta = eta_partial(prob, pt.theta);
        const SmoothedMap sm = smoothed_map(*prob.model, prob.smoother, pt.theta);
        const Vec g = sm.dmbar * (pt.eta - sm.mbar) - prob.G_sq * pt.theta;
        const Vec d = spd_solve(normal_matrix(sm.dmbar, prob.G_sq), g, "fit_joint");
        const double base = extended_loglik(prob, pt);
        const double slope = g.dot(d);
        double alpha = 1.0;
        bool accepted = false;
        if (std::abs(slope) <= 1e-12 * (1.0 + std::abs(base))) {
            const ExtendedPoint full{pt.theta + d, eta_partial(prob, pt.theta + d)};
            if (extended_gradient(prob, full).norm() < extended_gradient(prob, pt).norm()) {
                pt = full;
                accepted = true;
            }
        }
        for (int h = 0; !accepted && h < kMaxHalvings; ++h, alpha *= 0.5) {
            const ExtendedPoint cand{pt.theta + alpha * d, pt.eta};
            const double val = extended_loglik(prob, cand);
            if (std::isfinite(val) && val >= base + kArmijo * alpha * slope) {
                pt = cand;
                accepted = true;
            }
        }
        if (!accepted) break;
        r.trace.push_back(-extended_loglik(prob, pt));
        r.iterations = it + 1;
    }
    r.theta = pt.theta;
    r.eta = eta_partial(prob, pt.theta);
    r.grad_norm = extended_gradient(prob, {r.theta, r.eta}).norm();
    r.converged = r.grad_norm <= gtol;
    return r;
}

PopulationTarget population_target(const CalmedProblem& prob, const Vec& m_star, const FitOptions& opt) {
    if (m_star.size() != prob.model->n()) throw ValidationError("population_target: m_star has wrong length");
    CalmedProblem noiseless = prob;
    noiseless.Z = prob.smoother.phi * m_star;
    const FitResult f = fit_profile(noiseless, prob.local.theta0, opt);
    if (!f.converged) throw NumericalError("population_target: solver did not converge");
    return {f.theta, f.eta};
}

InfoPack info_pack(const CalmedProblem& prob, const Vec& theta_ref) {
    return info_pack(prob, theta_ref, eta_partial(prob, theta_ref));
}

InfoPack info_pack(const CalmedProblem& prob, const Vec& theta_ref, const Vec& eta_ref) {
    const SmoothedMap sm = smoothed_map(*prob.model, prob.smoother, theta_ref);
    InfoPack ip;
    ip.D_sq = sm.dmbar * sm.dmbar.transpose();
    ip.GG_sq = 2.0 * prob.G_sq;
    ip.D_GG_sq = ip.D_sq + ip.GG_sq;
    const Vec w = prob.smoother.phi.transpose() * (sm.mbar - eta_ref);
    ip.full_blocks.Dtt = symmetrize(ip.D_sq + prob.model->weighted_hessian(theta_ref, w) + prob.G_sq);
    ip.full_blocks.A = -sm.dmbar;
    ip.full_blocks.Hnn = 2.0 * Mat::Identity(prob.q(), prob.q());
    ip.second_order_exact = prob.model->analytic_derivatives();
    return ip;
}

ScoreReport effective_score(const CalmedProblem& prob, const Vec& theta_ref, const Vec& eps_smoothed) {
    if (eps_smoothed.size() != prob.q()) throw ValidationError("effective_score: noise has wrong length");
    const SmoothedMap sm = smoothed_map(*prob.model, prob.smoother, theta_ref);
    const Mat dgg_inv = sym_inv_sqrt(sm.dmbar * sm.dmbar.transpose() + 2.0 * prob.G_sq);
    ScoreReport s;
    s.xi_GG = dgg_inv * (sm.dmbar * eps_smoothed);
    return s;
}

ScoreReport effective_dimension(const CalmedProblem& prob, const Vec& theta_ref, const Mat& V_sq, double x) {
    if (V_sq.rows() != prob.q() || V_sq.cols() != prob.q())
        throw ValidationError("effective_dimension: V^2 must be q x q");
    require_symmetric_psd(V_sq, "effective_dimension V^2");
    if (!(x >= 0.0)) throw DomainError("effective_dimension: x must be >= 0");
    const SmoothedMap sm = smoothed_map(*prob.model, prob.smoother, theta_ref);
    const Mat dgg_inv = sym_inv_sqrt(sm.dmbar * sm.dmbar.transpose() + 2.0 * prob.G_sq);
    const Mat a = dgg_inv * sm.dmbar;
    ScoreReport s;
    s.B_GG = symmetrize(a * V_sq * a.transpose());
    s.p_GG = s.B_GG.trace();
    s.x = x;
    s.r_GG = std::sqrt(s.p_GG) + std::sqrt(2.0 * x * std::max(0.0, sym_max_eig(s.B_GG)));
    return s;
}

double c3_constant(double varrho, double omega_plus) {
    if (!(varrho >= 0.0 && varrho < 0.5) || !(omega_plus >= 0.0 && omega_plus < 1.0))
        throw DomainError("c3_constant: need 0 <= varrho < 1/2 and 0 <= omega_plus < 1");
    return 16.0 / (std::pow(1.0 - 2.0 * varrho, 1.5) * std::pow(1.0 - omega_plus, 3));
}

FisherWilksReport fisher_wilks_report(const CalmedProblem& prob, const Vec& theta_hat, const Vec& theta_star_G,
                                      const Vec& xi, double r_GG, const SmoothnessConsts& c) {
    const SmoothedMap sm = smoothed_map(*prob.model, prob.smoother, theta_star_G);
    const Mat dgg = sym_sqrt(sm.dmbar * sm.dmbar.transpose() + 2.0 * prob.G_sq);
    FisherWilksReport r;
    r.omega = c.c3 * c.tau * r_GG / c.nu;
    r.xi_norm = xi.norm();
    r.conditions_met = r.omega <= 1.0 / 3.0 && c.varrho < 0.5;
    const double inf = std::numeric_limits<double>::infinity();
    const double rr = c.varrho < 0.5 ? c.varrho / (1.0 - 2.0 * c.varrho) : inf;
    r.fisher_bound = c.varrho < 0.5
                         ? 2.0 * (std::sqrt(2.0 * r.omega) + c.varrho) / (1.0 - 2.0 * c.varrho) * r.xi_norm
                         : inf;
    r.wilks_bound = r.omega < 1.0 ? r.xi_norm * r.xi_norm * (r.omega / (1.0 - r.omega) + rr) : inf;
    r.fisher_resid = (dgg * (theta_hat - theta_star_G) - xi).norm();
    // 2𝕃(θ̂) − 2𝕃(θ*_G) with 𝕃 = −½·profile_objective
    const double wilks_stat = profile_objective_diff(prob, theta_star_G, theta_hat);
    r.wilks_resid = std::abs(wilks_stat - r.xi_norm * r.xi_norm);
    const double slack = 1e-10 * std::max(1.0, r.xi_norm);
    r.fisher_ok = r.conditions_met && r.fisher_resid <= r.fisher_bound + slack;
    r.wilks_ok = r.conditions_met && r.wilks_resid <= r.wilks_bound + slack * std::max(1.0, r.xi_norm);
    return r;
}

BiasRiskReport bias_and_risk_bounds(const CalmedProblem& prob, const Vec& theta_star, const Vec& theta_ref,
                                    const ScoreReport& score, double xi_norm, const SmoothnessConsts& c) {
    const SmoothedMap sm = smoothed_map(*prob.model, prob.smoother, theta_ref);
    const Mat dgg_sq = sm.dmbar * sm.dmbar.transpose() + 2.0 * prob.G_sq;
    const Vec pen = 2.0 * prob.G_sq * theta_star;
    BiasRiskReport r;
    r.bias_vec_approx = -spd_solve(dgg_sq, pen, "bias_and_risk_bounds");
    r.b_GG = (sym_inv_sqrt(dgg_sq) * pen).norm();
    const double omega = c.c3 * c.tau * score.r_GG / c.nu;
    r.delta_G = c.varrho < 0.5 ? 2.0 * (std::sqrt(2.0 * omega) + c.varrho) / (1.0 - 2.0 * c.varrho)
                               : std::numeric_limits<double>::infinity();
    r.delta_star = c.c3 * c.tau * r.b_GG / c.nu;
    r.bias_norm_bound = (1.0 + r.delta_G) * xi_norm +
                        (r.delta_star < 1.0 ? r.b_GG / (1.0 - r.delta_star) : std::numeric_limits<double>::infinity());
    r.risk_prediction = score.p_GG + r.b_GG * r.b_GG;
    r.valid = r.delta_star <= 1.0 / 3.0 && omega <= 1.0 / 3.0 && c.varrho < 0.5;
    return r;
}

}  // namespace calmreg
