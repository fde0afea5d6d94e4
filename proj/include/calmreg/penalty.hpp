#pragma once

#include <vector>

#include "calmreg/linalg.hpp"

namespace calmreg {

struct PenaltyInputs {
    Mat A;      // q×p linearized design
    Mat G0_sq;  // p×p PSD smoothness operator
    double sigma_sq = 1.0;

    void validate() const;
};

double effective_dim_w(const PenaltyInputs& in, double w);

struct PenaltyPath {
    std::vector<double> w_grid;
    std::vector<double> p_w;
    bool strictly_decreasing = false;
};

PenaltyPath penalty_path(const PenaltyInputs& in, const std::vector<double>& w_grid);

struct RiskSelection {
    double w_star = 0.0;
    double risk = 0.0;
    bool fallback_grid = false;
};

RiskSelection select_w_risk(const PenaltyInputs& in, double lo = 1e-6, double hi = 1e6);

double select_w_balance(const PenaltyInputs& in, double c0);

}  // namespace calmreg
