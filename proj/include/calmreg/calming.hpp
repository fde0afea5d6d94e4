#pragma once

#include <vector>

#include "calmreg/model.hpp"
#include "calmreg/semiparam.hpp"

namespace calmreg {

struct CalmedProblem {
    ModelPtr model;
    Smoother smoother;
    Mat G_sq;  // p×p PSD penalty
    Vec Z;     // q observed smoothed data
    LocalSet local;

    int p() const { return model->p(); }
    int q() const { return smoother.q(); }
    void validate() const;
};

struct ExtendedPoint {
    Vec theta;
    Vec eta;
};

double extended_loglik(const CalmedProblem& prob, const ExtendedPoint& pt);
// Gradient of the extended log-likelihood, stacked (θ, η).
Vec extended_gradient(const CalmedProblem& prob, const ExtendedPoint& pt);
Vec eta_partial(const CalmedProblem& prob, const Vec& theta);
double profile_objective(const CalmedProblem& prob, const Vec& theta);
Vec profile_gradient(const CalmedProblem& prob, const Vec& theta);
// Profile log-likelihood −½·profile_objective.
double profile_loglik(const CalmedProblem& prob, const Vec& theta);
Vec gauss_newton_step(const CalmedProblem& prob, const Vec& theta);

struct FitOptions {
    double tol = 1e-10;
    int max_iter = 200;
    bool require_local = true;
};

struct FitResult {
    Vec theta;
    Vec eta;
    std::vector<double> trace;  // objective per iterate, starting with θ_init
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
};

FitResult fit_profile(const CalmedProblem& prob, const Vec& theta_init, const FitOptions& opt = {});
FitResult fit_joint(const CalmedProblem& prob, const ExtendedPoint& init, FitOptions opt = {});

struct PopulationTarget {
    Vec theta;
    Vec eta;
};

PopulationTarget population_target(const CalmedProblem& prob, const Vec& m_star,
                                   const FitOptions& opt = {});

struct InfoPack {
    Mat D_sq;
    Mat GG_sq;
    Mat D_GG_sq;
    BlockHessian full_blocks;  // negative Hessian of the extended log-likelihood
    bool second_order_exact = true;
};

// η defaults to eta_partial(prob, θ_ref).
InfoPack info_pack(const CalmedProblem& prob, const Vec& theta_ref);
InfoPack info_pack(const CalmedProblem& prob, const Vec& theta_ref, const Vec& eta_ref);

struct ScoreReport {
    Vec xi_GG;
    Mat B_GG;
    double p_GG = 0.0;
    double r_GG = 0.0;
    double x = 0.0;
};

ScoreReport effective_score(const CalmedProblem& prob, const Vec& theta_ref, const Vec& eps_smoothed);
ScoreReport effective_dimension(const CalmedProblem& prob, const Vec& theta_ref, const Mat& V_sq,
                                double x);

struct SmoothnessConsts {
    double c3 = 0.0;
    double tau = 0.0;
    double varrho = 0.0;
    double nu = 2.0 / 3.0;
};

// 16/((1−2ϱ)^{3/2}(1−ω⁺)³); multiplied by τ it gives the third-order
// smoothness constant of the extended log-likelihood.
double c3_constant(double varrho, double omega_plus);

struct FisherWilksReport {
    double omega = 0.0;
    double xi_norm = 0.0;
    double fisher_resid = 0.0;
    double fisher_bound = 0.0;
    double wilks_resid = 0.0;
    double wilks_bound = 0.0;
    bool fisher_ok = false;
    bool wilks_ok = false;
    bool conditions_met = false;
};

FisherWilksReport fisher_wilks_report(const CalmedProblem& prob, const Vec& theta_hat,
                                      const Vec& theta_star_G, const Vec& xi, double r_GG,
                                      const SmoothnessConsts& consts);

struct BiasRiskReport {
    Vec bias_vec_approx;
    double b_GG = 0.0;  // ‖𝔻_𝔾⁻¹𝔾²θ*‖ with 𝔾² = 2G²
    double delta_G = 0.0;
    double delta_star = 0.0;
    double bias_norm_bound = 0.0;
    double risk_prediction = 0.0;
    bool valid = false;
};

BiasRiskReport bias_and_risk_bounds(const CalmedProblem& prob, const Vec& theta_star,
                                    const Vec& theta_ref, const ScoreReport& score, double xi_norm,
                                    const SmoothnessConsts& consts);

}  // namespace calmreg
