#pragma once

#include <vector>

namespace calmreg {

enum class LawKind { gaussian, rademacher, centered_uniform, tabulated };

// Standardized scalar noise law. For the tabulated kind, `points`/`weights`
// hold a discrete mass function; analytic kinds leave them empty except the
// centered uniform, which stores its Gauss-Legendre nodes.
struct ScalarLaw {
    LawKind kind = LawKind::gaussian;
    std::vector<double> points;
    std::vector<double> weights;
    double variance = 1.0;
};

ScalarLaw gaussian_law(double variance = 1.0);
ScalarLaw rademacher_law();
// Uniform on [−√3, √3] (unit variance).
ScalarLaw centered_uniform_law();
// Discrete mass function; weights must sum to one, mean zero, variance ≤ 1.
ScalarLaw tabulated_law(std::vector<double> points, std::vector<double> weights);
// Density sampled on a sorted grid, turned into masses by trapezoid weights.
ScalarLaw tabulated_density(const std::vector<double>& grid, const std::vector<double>& density);

struct Cumulants {
    double phi = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
    double d4 = 0.0;
};

Cumulants tilted_cumulants(const ScalarLaw& law, double t);

struct TiltedSummary {
    double g = 0.0;
    double tau3 = 0.0;
    double tau4 = 0.0;
    double subg_const = 0.0;
};

TiltedSummary tau34(const ScalarLaw& law, double g, int grid_size = 256);

struct TauPair {
    double tau3 = 0.0;
    double tau4 = 0.0;
};

TauPair iid_tau_scaling(double tau3_one, double tau4_one, long long n);

struct SharpTerms {
    double x_mu = 0.0;
    double eps_mu = 0.0;
    double omega = 0.0;
    double diamond4 = 0.0;
    double rho_mu = 0.0;
    double delta_mu = 0.0;
};

SharpTerms sharp_bound_terms(double kdens, double dim_q, double mu, double g, double tau3,
                             double tau4);

double iid_delta_bound(double x, double dim_q, long long n, double c_scale);

}  // namespace calmreg
