#pragma once

#include <Eigen/Dense>

namespace calmreg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Symmetric part (M + Mᵀ)/2.
Mat symmetrize(const Mat& m);

// Throws ValidationError unless m is square, symmetric to tol·max(1,‖m‖) and
// has min eigenvalue ≥ −tol·max(1,‖m‖). `what` names the matrix in messages.
void require_symmetric_psd(const Mat& m, const char* what, double tol = 1e-10);

// Eigenvalues of a symmetric matrix, ascending.
Vec sym_eigenvalues(const Mat& m);

// m^power for symmetric PSD m via eigendecomposition; negative round-off
// eigenvalues are clamped to zero. Negative powers require PD input.
Mat sym_pow(const Mat& m, double power);

inline Mat sym_sqrt(const Mat& m) { return sym_pow(m, 0.5); }
inline Mat sym_inv_sqrt(const Mat& m) { return sym_pow(m, -0.5); }

// Largest eigenvalue of a symmetric matrix.
double sym_max_eig(const Mat& m);
double sym_min_eig(const Mat& m);

// Solve S x = b for symmetric PD S; throws NumericalError if S is not PD.
Mat spd_solve(const Mat& s, const Mat& b, const char* what);
Mat spd_inverse(const Mat& s, const char* what);

}  // namespace calmreg
