#pragma once

// Small dense symmetric-matrix helpers shared by the covariance code.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace rdp::linalg {

// Relative eigenvalue cutoff used for pseudo-inverses and PSD square roots.
inline constexpr double kEigenCutoff = 1e-12;

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
    return 0.5 * (a + a.transpose());
}

// Moore-Penrose pseudo-inverse of a symmetric matrix. Eigenvalues whose
// magnitude is below cutoff * max(trace, largest |eigenvalue|, min_scale) are
// dropped; min_scale anchors the cutoff when a is a projection of a larger
// matrix.
inline Eigen::MatrixXd pinv_symmetric(const Eigen::MatrixXd& a, double cutoff = kEigenCutoff,
                                      double min_scale = 0.0) {
    if (a.size() == 0) return a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(a));
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double scale = std::max({std::abs(a.trace()), ev.cwiseAbs().maxCoeff(), min_scale});
    const double tol = cutoff * scale;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (std::abs(ev(i)) > tol) inv(i) = 1.0 / ev(i);
    }
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

// Square root of a PSD matrix. Negative eigenvalues (rounding noise on
// singular inputs) clamp to 0.
inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(a));
    Eigen::VectorXd root = es.eigenvalues();
    for (Eigen::Index i = 0; i < root.size(); ++i) root(i) = root(i) > 0.0 ? std::sqrt(root(i)) : 0.0;
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline double min_eigenvalue(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace rdp::linalg
