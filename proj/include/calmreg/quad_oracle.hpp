#pragma once

#include <functional>

#include "calmreg/linalg.hpp"

namespace calmreg {

// f(υ) = value0 − ½(υ − center)ᵀF(υ − center).
struct QuadObjective {
    Mat F;
    Vec center;
    double value0 = 0.0;

    double operator()(const Vec& u) const;
    void validate() const;
};

struct ShiftGain {
    Vec shift;
    double gain = 0.0;
};

// Maximizer shift and value gain of f(υ) + ⟨A, υ⟩.
ShiftGain linear_perturb_shift(const QuadObjective& q, const Vec& a);
// Bias υ*_G − υ* and gain of f_G(υ) = f(υ) − ½υᵀG²υ.
ShiftGain quad_penalty_bias(const QuadObjective& q, const Mat& g_sq);

struct FisherWilksBrackets {
    double wilks_lo = 0.0;
    double wilks_hi = 0.0;
    double fisher_resid = 0.0;
    double norm_hi = 0.0;
    bool fisher_valid = true;  // the residual bound assumes ω ≤ 1/3
};

FisherWilksBrackets fisher_wilks_brackets(double omega, double xi_norm);

struct ConcentrationCheck {
    bool precondition = false;  // ‖F^{-1/2}A‖ ≤ ν r
    bool holds = false;         // ‖F^{1/2}(ῠ − υ*)‖ ≤ r
    double radius = 0.0;
};

// Maximizes g(υ) + ⟨A, υ⟩ numerically from q.center and checks the radius.
ConcentrationCheck concentration_check(const std::function<double(const Vec&)>& g, const QuadObjective& q,
                                       const Vec& a, double nu, double r);

}  // namespace calmreg
