#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "calmreg/rng.hpp"

namespace testing_support {

using calmreg::CounterRng;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat gaussian_matrix(CounterRng& rng, int r, int c) {
    Mat m(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) m(i, j) = rng.normal();
    return m;
}

inline Vec gaussian_vector(CounterRng& rng, int n) { return gaussian_matrix(rng, n, 1).col(0); }

inline Mat random_orthogonal(CounterRng& rng, int n) {
    Eigen::HouseholderQR<Mat> qr(gaussian_matrix(rng, n, n));
    return qr.householderQ() * Mat::Identity(n, n);
}

inline Mat random_spd(CounterRng& rng, int n, double lo, double hi) {
    const Mat q = random_orthogonal(rng, n);
    Vec ev(n);
    for (int i = 0; i < n; ++i) ev(i) = lo + (hi - lo) * rng.uniform();
    const Mat m = q * ev.asDiagonal() * q.transpose();
    return 0.5 * (m + m.transpose());
}

// Central-difference gradient of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
    Vec g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vec a = x, b = x;
        a(i) += h;
        b(i) -= h;
        g(i) = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

}  // namespace testing_support
