#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "calmreg/linalg.hpp"

namespace calmreg {

// Regression map m: ℝᵖ → ℝⁿ. The Jacobian is returned as a p×n array whose
// column i is ∇mᵢ(θ).
class RegressionModel {
public:
    virtual ~RegressionModel() = default;
    virtual int p() const = 0;
    virtual int n() const = 0;
    virtual std::string name() const = 0;
    virtual Vec value(const Vec& theta) const = 0;
    virtual Mat jacobian(const Vec& theta) const = 0;

    // ⟨∇ᵏmᵢ(θ), u^⊗k⟩ for i = 1..n. The default uses nested central
    // differences of the value along θ + t·u.
    virtual Vec directional(const Vec& theta, const Vec& u, int k) const;
    // Σᵢ wᵢ ∇²mᵢ(θ), p×p. Default: central differences of w-weighted Jacobian.
    virtual Mat weighted_hessian(const Vec& theta, const Vec& w) const;
    // True when directional/weighted_hessian are analytic.
    virtual bool analytic_derivatives() const { return false; }

    Vec second_directional(const Vec& theta, const Vec& u) const { return directional(theta, u, 2); }
};

using ModelPtr = std::shared_ptr<const RegressionModel>;

// m(θ) = Ψᵀθ with Ψ a p×n matrix.
ModelPtr make_linear_model(const Mat& psi);
// mᵢ(θ) = θ₁ exp(−θ₂ xᵢ).
ModelPtr make_exp_decay_model(const Vec& x);
// mᵢ(θ) = θ₁ sin(θ₂ xᵢ).
ModelPtr make_sine_model(const Vec& x);
// m(θ) = θ² with p = n = 1.
ModelPtr make_square_model();

// Evenly spaced design points on [lo, hi].
Vec design_grid(int n, double lo, double hi);
// Random p×n design with orthogonal rows of norm √n, so ΨΨᵀ = n·I.
Mat random_linear_design(int p, int n, std::uint64_t seed);

enum class SmootherKind { identity, random_projection, tangent };

struct Smoother {
    SmootherKind kind = SmootherKind::identity;
    Mat phi;     // q×n
    Vec theta0;  // anchor for the tangent kind
    int q() const { return static_cast<int>(phi.rows()); }
};

Smoother identity_smoother(int n);
// Gaussian entries with variance 1/n; construction checks the empirical
// moments within five standard errors.
Smoother random_projection_smoother(int q, int n, std::uint64_t seed);
// Φ = ∇m(θ₀) (p×n).
Smoother tangent_smoother(const RegressionModel& model, const Vec& theta0);

struct SmoothedMap {
    Vec mbar;   // q
    Mat dmbar;  // p×q
};

SmoothedMap smoothed_map(const RegressionModel& model, const Smoother& sm, const Vec& theta);

struct LocalSet {
    Vec theta0;
    Mat D0_sq;
    double r0 = 1.0;
    double c_ring = 1.0;

    double radius_of(const Vec& theta) const;  // c_ring·‖D₀(θ−θ₀)‖
    bool contains(const Vec& theta) const;
};

LocalSet make_local_set(const RegressionModel& model, const Smoother& sm, const Vec& theta0,
                        double r0, double c_ring = 1.0);

double check_phi_condition(const RegressionModel& model, const Smoother& sm,
                           const std::vector<Vec>& theta_samples);

struct SamplingPlan {
    int rays = 200;
    int directions = 50;
    std::uint64_t seed = 0;
};

// Points θ₀ + s·D₀⁻¹v/c_ring with v on the unit sphere and s on a radius
// ladder closed under halving, so certificates are monotone in r₀.
std::vector<Vec> local_samples(const LocalSet& local, const SamplingPlan& plan);

struct GradRegularity {
    double omega_plus = 0.0;
    double c2 = 0.0;
};

GradRegularity check_grad_regularity(const RegressionModel& model, const Smoother& sm,
                                     const LocalSet& local, const SamplingPlan& plan = {});

double estimate_tau(const RegressionModel& model, const Smoother& sm, const LocalSet& local,
                    int k, const SamplingPlan& plan = {});

struct R0Check {
    double varrho = 0.0;
    bool pass = false;
};

R0Check check_r0(double r0, double tau);

struct ImageIncrement {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

ImageIncrement image_increment_check(const RegressionModel& model, const Smoother& sm,
                                     const LocalSet& local, const Vec& theta, double omega_plus);

}  // namespace calmreg
