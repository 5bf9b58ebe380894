#pragma once

// Hand-derived constraint expressions for frames 2-4, written in terms of the
// named coefficients (nu; omega_1, omega_2; tau_1..tau_3; lambda_1..lambda_4)
// with sigma2 factored out. Used to cross-check the generic covariance-based
// construction of the solver.
//
// The rate expressions replace Var(X_j | Xhat_{<j}) by its chain value
// rho^2 2^{-2R_{j-1}} Var(X_{j-1} | Xhat_{<j-1}) + (1 - rho^2), which is exact
// when every earlier frame spends its full rate.

#include "rdp/error.hpp"
#include "rdp/perception_metrics.hpp"
#include "rdp/rdp_solver.hpp"
#include "rdp/source_model.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace rdp {

struct ConstraintResidual {
    std::string name;
    double value = 0.0;         // equality: lhs - rhs; inequality: slack rhs - lhs (>= 0 when met)
    bool is_inequality = false;
};

namespace detail {

inline double neg2(double bits) { return std::exp2(-2.0 * bits); }

inline void need_prefix(const ReconPolicy& prefix, int j) {
    if (prefix.size() < j - 1) throw ShapeError("explicit program of frame " + std::to_string(j) + " needs its prefix");
    for (int i = 0; i < j - 1; ++i) {
        if (prefix.frames[static_cast<std::size_t>(i)].frame_index != i + 1) throw ShapeError("malformed prefix");
    }
}

}  // namespace detail

inline std::vector<ConstraintResidual> explicit_program_residual(PlfKind kind, int j, const FrameCoeffs& coeffs,
                                                                 const RateProfile& profile,
                                                                 const ReconPolicy& prefix, const SourceSpec& spec) {
    using detail::neg2;
    spec.validate();
    if (j < 2 || j > 4) throw NotImplementedError("explicit program available for frames 2-4 only");
    if (kind == PlfKind::FMD && j == 4) throw NotImplementedError("no explicit fourth-frame FMD program");
    if (coeffs.frame_index != j) throw ShapeError("coefficients belong to another frame");
    coeffs.validate();
    detail::need_prefix(prefix, j);
    if (profile.size() < j) throw ShapeError("rate profile shorter than frame index");

    const double rho = spec.rho;
    const double a2 = coeffs.noise_var / spec.sigma2;
    const double nu = prefix.frames[0].source_coeff;
    std::vector<ConstraintResidual> out;

    if (j == 2) {
        const double w1 = coeffs.past_coeffs[0];
        const double w2 = coeffs.source_coeff;
        const double t2 = neg2(profile.at(2).finite_bits());
        if (kind == PlfKind::SA) out.push_back({"perception", w1 + nu * w2 * rho - rho * nu, false});
        if (kind == PlfKind::JD) out.push_back({"perception", w1 + nu * w2 * rho - rho, false});
        out.push_back({"variance", w1 * w1 + w2 * w2 + 2.0 * w1 * w2 * rho * nu + a2 - 1.0, false});
        out.push_back({"rate", (1.0 - w1 * w1 - 2.0 * w1 * w2 * rho * nu) * (1.0 - t2) -
                                   w2 * w2 * (1.0 - rho * rho * nu * nu * t2),
                       true});
        return out;
    }

    const FrameCoeffs& f2 = prefix.frames[1];
    const double w1 = f2.past_coeffs[0];
    const double w2 = f2.source_coeff;
    const double c_h2_x3 = w1 * rho * rho * nu + rho * w2;  // Cov(Xhat_2, X_3)

    if (j == 3) {
        const double t1 = coeffs.past_coeffs[0];
        const double t2 = coeffs.past_coeffs[1];
        const double t3 = coeffs.source_coeff;
        if (kind == PlfKind::SA) {
            out.push_back({"perception_1", t1 + t2 * rho * nu + t3 * rho * rho * nu - rho * rho * nu, false});
            out.push_back({"perception_2", t1 * rho * nu + t2 + t3 * c_h2_x3 - c_h2_x3, false});
        } else if (kind == PlfKind::JD) {
            out.push_back({"perception_1", t1 + t2 * rho + t3 * rho * rho * nu - rho * rho, false});
            out.push_back({"perception_2", t1 * rho + t2 + t3 * c_h2_x3 - rho, false});
        }
        const double quad = t1 * t1 + t2 * t2 + 2.0 * t1 * t2 * (w1 + w2 * rho * nu) +
                            2.0 * t1 * t3 * rho * rho * nu + 2.0 * t2 * t3 * c_h2_x3;
        out.push_back({"variance", quad + t3 * t3 + a2 - 1.0, false});
        const double r1 = neg2(profile.at(1).finite_bits());
        const double r2 = neg2(profile.at(2).finite_bits());
        const double r3 = neg2(profile.at(3).finite_bits());
        const double explained = rho * rho - std::pow(rho, 4) * r1 * r2 - rho * rho * (1.0 - rho * rho) * r2;
        out.push_back({"rate", (1.0 - r3) * (1.0 - quad) - t3 * t3 * (1.0 - r3 * explained), true});
        return out;
    }

    // j == 4; the fourth-frame programs take frame 1 as lossless.
    if (nu < 1.0 - 1e-6) throw ParameterError("fourth-frame program assumes nu = 1 (lossless first frame)");
    const FrameCoeffs& f3 = prefix.frames[2];
    const double tau1 = f3.past_coeffs[0];
    const double tau2 = f3.past_coeffs[1];
    const double tau3 = f3.source_coeff;
    const double l1 = coeffs.past_coeffs[0];
    const double l2 = coeffs.past_coeffs[1];
    const double l3 = coeffs.past_coeffs[2];
    const double l4 = coeffs.source_coeff;
    const double c2 = rho * w1 + w2;                                 // Cov(Xhat_2, X_2)
    const double c3 = rho * rho * tau1 + rho * c2 * tau2 + tau3;     // Cov(Xhat_3, X_3)
    const double rho2 = rho * rho;
    const double rho3 = rho2 * rho;
    out.push_back({"perception_1", l1 + rho * l2 + rho2 * l3 + rho3 * l4 - rho3, false});
    if (kind == PlfKind::SA) {
        out.push_back({"perception_2", rho * l1 + l2 + rho * c2 * l3 + rho2 * c2 * l4 - rho2 * c2, false});
        out.push_back({"perception_3", rho2 * l1 + rho * c2 * l2 + l3 + rho * c3 * l4 - rho * c3, false});
    } else {
        out.push_back({"perception_2", rho * l1 + l2 + rho * l3 + rho2 * c2 * l4 - rho2, false});
        out.push_back({"perception_3", rho2 * l1 + rho * l2 + l3 + rho * c3 * l4 - rho, false});
    }
    const double r1 = neg2(profile.at(1).finite_bits());
    const double r2 = neg2(profile.at(2).finite_bits());
    const double r3 = neg2(profile.at(3).finite_bits());
    const double r4 = neg2(profile.at(4).finite_bits());
    const double v4 = std::pow(rho, 6) * r3 * r2 * r1 + std::pow(rho, 4) * r3 * r2 * (1.0 - rho2) +
                      rho2 * r3 * (1.0 - rho2) + (1.0 - rho2);
    out.push_back({"rate", a2 * (1.0 - r4) - r4 * l4 * l4 * v4, true});
    return out;
}

}  // namespace rdp
