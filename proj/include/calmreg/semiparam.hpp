#pragma once

#include <functional>
#include <vector>

#include "calmreg/linalg.hpp"

namespace calmreg {

// Blocks of a negative Hessian [[Dtt, A], [Aᵀ, Hnn]] in (θ, η).
struct BlockHessian {
    Mat Dtt;
    Mat A;
    Mat Hnn;

    Mat assemble() const;
    void validate() const;
};

BlockHessian split_blocks(const Mat& full, int p);

double separability_rho(const BlockHessian& b);

struct SandwichResult {
    double lower_min_eig = 0.0;  // λ_min(F − (1−ρ)·block)
    double upper_min_eig = 0.0;  // λ_min((1+ρ)·block − F)
    bool holds = false;
};

SandwichResult sandwich_check(const Mat& full, const BlockHessian& b, double rho);

struct OrthoTransform {
    Mat C;         // q×p
    Mat D_eff_sq;  // p×p
    double rho = 0.0;
};

OrthoTransform orthogonalize(const BlockHessian& b);

using JointFunction = std::function<double(const Vec& theta, const Vec& eta)>;

// f̆(θ, τ) = f(θ, τ − C(θ − θ_ref)).
double transformed_value(const JointFunction& f, const Mat& C, const Vec& theta_ref, const Vec& theta,
                         const Vec& tau);

// Central-difference ∇_τ∇_θ f̆ at (θ_ref, η_ref) with one Richardson step,
// p×q. step ≤ 0 selects 2e-4·(1 + max |coordinate|).
Mat transformed_mixed_derivative(const JointFunction& f, const Mat& C, const Vec& theta_ref,
                                 const Vec& eta_ref, double step = 0.0);

// max over τ samples of ‖argmax_θ f̆(θ, τ) − θ_ref‖.
double semiorthogonality_argmax_check(const JointFunction& f, const Mat& C, const Vec& theta_ref,
                                      const std::vector<Vec>& tau_samples);

double semiparam_bias_bound(double c3, double r_bar, double n_eff, double quadform,
                            double nu = 2.0 / 3.0);

struct CompositeRho {
    double rho_z = 0.0;
    double rho_tau = 0.0;
    double sum = 0.0;
    double direct = 0.0;
};

CompositeRho composite_rho(const Mat& full, int p, int q1, int q2);

Vec partial_quad_shift(const BlockHessian& b, const Vec& eta_dev);

// Newton maximization of a smooth function with central-difference
// gradient and Hessian, backtracking on the function value.
struct NumericMax {
    Vec arg;
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool concave_at_max = false;
};

NumericMax maximize_numeric(const std::function<double(const Vec&)>& f, const Vec& start,
                            int max_iter = 100);

}  // namespace calmreg
