#pragma once

#include "calmreg/linalg.hpp"

namespace calmreg {

// Trace, trace of the square and operator norm of a PSD operator B.
struct SpectrumStats {
    double dim_a = 0.0;
    double v2 = 0.0;
    double b_norm = 0.0;

    double v() const;
    // Throws ValidationError if the invariants between the three fields fail.
    void validate() const;
};

SpectrumStats make_stats(double dim_a, double v2, double b_norm);
SpectrumStats spectrum_stats(const Mat& b);
// Stats of the identity in dimension d.
SpectrumStats identity_stats(double d);

struct ZQuantile {
    double z_sq = 0.0;  // tr B + 2√(x tr B²) + 2x‖B‖
    double z = 0.0;     // √tr B + √(2x‖B‖)
};

ZQuantile z_quantile(const SpectrumStats& s, double x);

double exp_moment_bound(const SpectrumStats& s, double mu);
double gaussian_det_moment(const Mat& b, double mu);
double mu_of_x(const SpectrumStats& s, double x);

struct ExpTailSolution {
    double x_c = 0.0;
    double mu_c = 0.0;
    double g_c = 0.0;
    double g = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

// Left and right sides of the crossover equation at level x.
double xc_lhs(double g, const SpectrumStats& s, double x);
double xc_rhs(const SpectrumStats& s, double x);

ExpTailSolution solve_xc(double g, const SpectrumStats& s);

// Radius g for which the crossover level equals x_target.
double g_for_crossover(const SpectrumStats& s, double x_target);

enum class TailBranch { gaussian, exponential };

TailBranch zc_branch(const ExpTailSolution& sol, double x);
double zc_quantile(const ExpTailSolution& sol, const SpectrumStats& s, double x);

double min_g_for_gaussian_regime(const SpectrumStats& s, double x);

struct LowerTail {
    double threshold = 0.0;
    bool vacuous = false;
};

LowerTail lower_tail_threshold(const SpectrumStats& s, double x);

}  // namespace calmreg
