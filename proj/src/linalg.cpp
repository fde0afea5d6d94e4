#include "calmreg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calmreg/error.hpp"

namespace calmreg {

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

void require_symmetric_psd(const Mat& m, const char* what, double tol) {
    if (m.rows() != m.cols())
        throw ValidationError(std::string(what) + ": matrix is not square");
    if (!m.allFinite()) throw ValidationError(std::string(what) + ": non-finite entries");
    if (m.size() == 0) return;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > tol * scale)
        throw ValidationError(std::string(what) + ": symmetry check failed (max |m - m^T| = " +
                              std::to_string(asym) + ")");
    const double lmin = sym_min_eig(m);
    if (lmin < -tol * scale)
        throw ValidationError(std::string(what) + ": PSD check failed (min eigenvalue = " +
                              std::to_string(lmin) + ")");
}

Vec sym_eigenvalues(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

Mat sym_pow(const Mat& m, double power) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
    Vec lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        double l = std::max(lam(i), 0.0);
        if (power < 0 && l <= 0.0)
            throw NumericalError("matrix power: singular matrix for negative exponent");
        lam(i) = std::pow(l, power);
    }
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

double sym_max_eig(const Mat& m) { return m.size() == 0 ? 0.0 : sym_eigenvalues(m).maxCoeff(); }
double sym_min_eig(const Mat& m) { return m.size() == 0 ? 0.0 : sym_eigenvalues(m).minCoeff(); }

Mat spd_solve(const Mat& s, const Mat& b, const char* what) {
    Eigen::LLT<Mat> llt(symmetrize(s));
    if (llt.info() != Eigen::Success)
        throw NumericalError(std::string(what) + ": matrix is not positive definite");
    return llt.solve(b);
}

Mat spd_inverse(const Mat& s, const char* what) {
    return spd_solve(s, Mat::Identity(s.rows(), s.cols()), what);
}

}  // namespace calmreg
