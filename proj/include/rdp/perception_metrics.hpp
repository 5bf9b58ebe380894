#pragma once

// Squared Wasserstein-2 distances between zero-mean Gaussian laws and the
// three zero-perception residuals evaluated on a JointGaussian.

#include "rdp/error.hpp"
#include "rdp/linalg.hpp"
#include "rdp/source_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace rdp {

enum class PlfKind { FMD, JD, SA };

inline std::string_view to_string(PlfKind k) {
    switch (k) {
        case PlfKind::FMD: return "fmd";
        case PlfKind::JD: return "jd";
        case PlfKind::SA: return "sa";
    }
    return "?";
}

inline PlfKind parse_plf(std::string_view s) {
    std::string low(s);
    std::transform(low.begin(), low.end(), low.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (low == "fmd") return PlfKind::FMD;
    if (low == "jd") return PlfKind::JD;
    if (low == "sa") return PlfKind::SA;
    throw ParameterError("unknown perception loss '" + std::string(s) + "'");
}

inline constexpr PlfKind kAllPlfKinds[] = {PlfKind::FMD, PlfKind::JD, PlfKind::SA};

inline double w2sq_gaussian_1d(double var_a, double var_b) {
    if (!(var_a >= 0.0) || !(var_b >= 0.0)) throw ParameterError("variance must be >= 0");
    const double d = std::sqrt(var_a) - std::sqrt(var_b);
    return d * d;
}

// Bures form tr A + tr B - 2 tr (B^1/2 A B^1/2)^1/2.
inline double w2sq_gaussian_multi(const Eigen::MatrixXd& cov_a, const Eigen::MatrixXd& cov_b) {
    if (cov_a.rows() != cov_a.cols() || cov_b.rows() != cov_b.cols() || cov_a.rows() != cov_b.rows()) {
        throw ShapeError("w2sq_gaussian_multi: dimension mismatch");
    }
    if (cov_a.size() == 0) return 0.0;
    const Eigen::MatrixXd rb = linalg::sqrt_psd(cov_b);
    const Eigen::MatrixXd inner = linalg::symmetrize(rb * cov_a * rb);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
    double cross = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) cross += std::sqrt(std::max(0.0, es.eigenvalues()(i)));
    return std::max(0.0, cov_a.trace() + cov_b.trace() - 2.0 * cross);
}

// Index sets of the two laws a PLF compares at frame j.
struct PlfBlocks {
    std::vector<int> source_side;
    std::vector<int> recon_side;
};

inline PlfBlocks plf_blocks(PlfKind kind, const JointGaussian& joint, int j) {
    if (j < 1 || j > joint.reconstructed()) {
        throw ShapeError("plf_residual: frame " + std::to_string(j) + " not reconstructed");
    }
    PlfBlocks b;
    switch (kind) {
        case PlfKind::FMD:
            b.source_side = {joint.source_index(j)};
            b.recon_side = {joint.recon_index(j)};
            break;
        case PlfKind::JD:
            for (int i = 1; i <= j; ++i) {
                b.source_side.push_back(joint.source_index(i));
                b.recon_side.push_back(joint.recon_index(i));
            }
            break;
        case PlfKind::SA:
            b.source_side = joint.past_recon_indices(j);
            b.recon_side = b.source_side;
            b.source_side.push_back(joint.source_index(j));
            b.recon_side.push_back(joint.recon_index(j));
            break;
    }
    return b;
}

inline double plf_residual(PlfKind kind, const JointGaussian& joint, int j) {
    const PlfBlocks b = plf_blocks(kind, joint, j);
    return w2sq_gaussian_multi(joint.block(b.source_side), joint.block(b.recon_side));
}

}  // namespace rdp
