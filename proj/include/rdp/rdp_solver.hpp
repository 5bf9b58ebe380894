#pragma once

// Zero-perception distortion minimization per frame for the FMD, JD and SA
// losses, plus the greedy horizon solve and a brute-force grid oracle.

#include "rdp/error.hpp"
#include "rdp/frame_program.hpp"
#include "rdp/linalg.hpp"
#include "rdp/perception_metrics.hpp"
#include "rdp/source_model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rdp {

struct RateProfile {
    std::vector<Rate> rates;

    RateProfile() = default;
    explicit RateProfile(std::vector<Rate> r) : rates(std::move(r)) {}
    RateProfile(std::initializer_list<double> bits) {
        for (double b : bits) rates.emplace_back(b);
    }

    void validate() const {
        for (const Rate& r : rates) {
            if (!(r.bits() >= 0.0)) throw ParameterError("rates must be >= 0");
        }
    }

    [[nodiscard]] int size() const { return static_cast<int>(rates.size()); }

    // 1-based.
    [[nodiscard]] Rate at(int j) const {
        if (j < 1 || j > size()) throw ShapeError("rate profile has no frame " + std::to_string(j));
        return rates[static_cast<std::size_t>(j - 1)];
    }
};

enum class SolverStatus { Analytic, BoundaryLagrange, GridPolish };

inline std::string_view to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::Analytic: return "analytic";
        case SolverStatus::BoundaryLagrange: return "boundary-lagrange";
        case SolverStatus::GridPolish: return "grid-polish";
    }
    return "?";
}

struct FrameSolution {
    PlfKind kind = PlfKind::SA;
    FrameCoeffs coeffs;
    double distortion = 0.0;
    double rate_used = 0.0;
    double perception_residual = 0.0;
    SolverStatus status = SolverStatus::Analytic;
};

struct SolverOptions {
    double grid_step = 0.005;
    double bisection_tol = 1e-10;
    int max_polish = 200;
};

// Tolerances of the round-trip feasibility check.
inline constexpr double kRateSlackBits = 1e-6;
inline constexpr double kResidualTol = 1e-6;

namespace detail {

inline FrameSolution finish(PlfKind kind, const JointGaussian& with_frame, int j, SolverStatus status) {
    FrameSolution sol;
    sol.kind = kind;
    sol.coeffs = with_frame.coeffs(j);
    sol.distortion = frame_distortion(with_frame, j);
    sol.rate_used = frame_rate(with_frame, j);
    sol.perception_residual = plf_residual(kind, with_frame, j);
    sol.status = status;
    return sol;
}

inline bool passes_round_trip(const FrameSolution& sol, double rate_bits) {
    return sol.rate_used <= rate_bits + kRateSlackBits && sol.perception_residual <= kResidualTol;
}

struct LagrangeResult {
    bool ok = false;
    Eigen::VectorXd w;
};

// Maximizes m'w over {A w = d, w'Qw <= sigma2}. Parametrize w = w_b + t d_w
// where w_b minimizes w'Qw on the affine set and d_w = N H^+ N' m is the
// ascent direction in the Q-geometry; then w'Qw = f0 + t^2 c2 and the
// optimum sits at t = sqrt((sigma2 - f0) / c2), the inverse of twice the
// Lagrange multiplier. A bisection on t absorbs rounding at the boundary.
inline LagrangeResult lagrange(const FrameProgram& p, const SolverOptions& opts) {
    LagrangeResult out;
    const int k = p.k;
    Eigen::VectorXd w0 = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd N;
    if (p.A.rows() > 0) {
        w0 = pinv(p.A) * p.d;
        if ((p.A * w0 - p.d).lpNorm<Eigen::Infinity>() > 1e-9 * p.sigma2) {
            throw InfeasibleError("covariance match", "past reconstructions cannot reproduce the required covariances");
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.A, Eigen::ComputeFullV);
        const int r = numeric_rank(p.A);
        N = svd.matrixV().rightCols(k - r);
    } else {
        N = Eigen::MatrixXd::Identity(k, k);
    }

    Eigen::VectorXd wb = w0;
    Eigen::VectorXd dw = Eigen::VectorXd::Zero(k);
    if (N.cols() > 0) {
        const Eigen::MatrixXd H = linalg::symmetrize(N.transpose() * p.Q * N);
        const Eigen::MatrixXd Hp = linalg::pinv_symmetric(H, linalg::kEigenCutoff, p.Q.trace());
        wb = w0 - N * (Hp * (N.transpose() * (p.Q * w0)));
        dw = N * (Hp * (N.transpose() * p.m));
    }
    const double f0 = p.quad(wb);
    if (f0 > p.sigma2 * (1.0 + 1e-9)) {
        throw InfeasibleError("variance match",
                              "equalities force alpha^2 = " + std::to_string(p.sigma2 - f0) + " < 0");
    }
    const double c2 = p.quad(dw);
    const double slack = p.sigma2 - f0;
    double t = 0.0;
    if (c2 > 1e-300 && slack > 1e-15 * p.sigma2) {
        t = std::sqrt(slack / c2);
        if (!p.feasible(wb + t * dw)) {
            double lo = 0.0;
            double hi = t;
            while (hi - lo > opts.bisection_tol * std::max(1.0, hi)) {
                const double mid = 0.5 * (lo + hi);
                if (p.feasible(wb + mid * dw)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            t = lo;
        }
    }
    out.w = wb + t * dw;
    for (Eigen::Index i = 0; i < k; ++i) {
        if (std::abs(out.w(i)) < 1e-13) out.w(i) = 0.0;
    }
    out.ok = out.w.allFinite();
    return out;
}

inline FrameSolution solve_generic(PlfKind kind, int j, Rate rate, const JointGaussian& prefix_joint,
                                   const SolverOptions& opts) {
    const FrameProgram p = build_program(kind, j, rate, prefix_joint);
    if (kind == PlfKind::JD && j > 2) {
        const double past = plf_residual(PlfKind::JD, prefix_joint, j - 1);
        if (past > kResidualTol) {
            throw InfeasibleError("joint law of past frames",
                                  "prefix JD residual " + std::to_string(past) + " is nonzero");
        }
    }

    double best_seen = std::numeric_limits<double>::infinity();
    const LagrangeResult lr = lagrange(p, opts);
    Eigen::VectorXd start;
    if (lr.ok) {
        const JointGaussian joint = extend_joint(prefix_joint, p.coeffs(lr.w));
        FrameSolution sol = finish(kind, joint, j, SolverStatus::BoundaryLagrange);
        if (passes_round_trip(sol, p.rate_bits)) return sol;
        best_seen = sol.distortion;
        start = lr.w;
    }

    // Fallback: grid over the free coordinates, then compass polish.
    const Elimination e = eliminate(p);
    GridResult g;
    if (e.free.size() <= 3) g = grid_search(p, e, opts.grid_step);
    if (!g.found && start.size() == p.k && p.feasible(start)) {
        g.found = true;
        g.w = start;
        g.distortion = p.distortion(start);
    }
    if (g.found) {
        const GridResult pol = compass_polish(p, e, g.w, opts.grid_step, opts.bisection_tol, opts.max_polish);
        const JointGaussian joint = extend_joint(prefix_joint, p.coeffs(pol.found ? pol.w : g.w));
        FrameSolution sol = finish(kind, joint, j, SolverStatus::GridPolish);
        if (passes_round_trip(sol, p.rate_bits)) return sol;
        best_seen = std::min(best_seen, sol.distortion);
    }
    throw NumericalError("frame " + std::to_string(j) + ": no feasible solution passed verification", best_seen);
}

}  // namespace detail

// Frame 1 is identical for every loss: nu = sqrt(1 - 2^{-2R}),
// alpha^2 = 2^{-2R} sigma2, D = 2 sigma2 (1 - nu).
inline FrameSolution solve_frame1(Rate r1, const SourceSpec& spec, PlfKind kind = PlfKind::SA) {
    spec.validate();
    if (!(r1.bits() >= 0.0)) throw ParameterError("rate must be >= 0");
    const double bits = r1.finite_bits();
    const double sigma2 = spec.sigma2;
    FrameCoeffs fc;
    fc.frame_index = 1;
    fc.source_coeff = std::sqrt(-std::expm1(-2.0 * bits * std::numbers::ln2));
    fc.noise_var = std::exp2(-2.0 * bits) * sigma2;
    const JointGaussian joint = extend_joint(source_covariance(spec), fc);
    FrameSolution sol = detail::finish(kind, joint, 1, SolverStatus::Analytic);
    sol.distortion = 2.0 * sigma2 * (1.0 - fc.source_coeff);
    return sol;
}

// Solves frame j given an already-built joint holding Xhat_1..Xhat_{j-1}.
inline FrameSolution solve_frame_on(PlfKind kind, int j, Rate rate, const JointGaussian& prefix_joint,
                                    const SolverOptions& opts = {}) {
    if (j == 1) return solve_frame1(rate, prefix_joint.spec(), kind);
    return detail::solve_generic(kind, j, rate, prefix_joint, opts);
}

inline FrameSolution solve_frame(PlfKind kind, int j, const RateProfile& profile, const ReconPolicy& prefix,
                                 const SourceSpec& spec, const SolverOptions& opts = {}) {
    spec.validate();
    profile.validate();
    if (j < 1 || j > spec.horizon) throw ShapeError("frame " + std::to_string(j) + " outside horizon");
    if (prefix.size() < j - 1) throw ShapeError("prefix must hold frames 1.." + std::to_string(j - 1));
    ReconPolicy head;
    head.frames.assign(prefix.frames.begin(), prefix.frames.begin() + (j - 1));
    const JointGaussian joint = build_joint(spec, head);
    return solve_frame_on(kind, j, profile.at(j), joint, opts);
}

struct HorizonSolution {
    ReconPolicy policy;
    std::vector<FrameSolution> frames;
    JointGaussian joint;
};

// Greedy sequential solve j = 1..T. Frame-level errors are rethrown nested
// inside a FrameError carrying the frame index.
inline HorizonSolution solve_horizon(PlfKind kind, const RateProfile& profile, const SourceSpec& spec,
                                     const SolverOptions& opts = {}) {
    spec.validate();
    profile.validate();
    if (profile.size() != spec.horizon) {
        throw ShapeError("rate profile length " + std::to_string(profile.size()) + " != horizon " +
                         std::to_string(spec.horizon));
    }
    HorizonSolution out{{}, {}, source_covariance(spec)};
    for (int j = 1; j <= spec.horizon; ++j) {
        try {
            FrameSolution sol = solve_frame_on(kind, j, profile.at(j), out.joint, opts);
            out.joint = extend_joint(out.joint, sol.coeffs);
            out.policy.frames.push_back(sol.coeffs);
            out.frames.push_back(std::move(sol));
        } catch (const Error& e) {
            std::throw_with_nested(FrameError(j, e.what()));
        }
    }
    return out;
}

// Independent oracle: exhaustive grid over the free coefficients after
// eliminating the covariance-match equalities. At most 3 free coefficients.
inline FrameSolution brute_force_frame(PlfKind kind, int j, const RateProfile& profile, const ReconPolicy& prefix,
                                       const SourceSpec& spec, double grid_step) {
    spec.validate();
    profile.validate();
    if (j < 1 || j > spec.horizon) throw ShapeError("frame " + std::to_string(j) + " outside horizon");
    if (j > 3) throw ParameterError("brute_force_frame supports j <= 3");
    if (prefix.size() < j - 1) throw ShapeError("prefix must hold frames 1.." + std::to_string(j - 1));
    ReconPolicy head;
    head.frames.assign(prefix.frames.begin(), prefix.frames.begin() + (j - 1));
    const JointGaussian joint = build_joint(spec, head);

    if (j == 1) {
        // Single coefficient nu with alpha^2 = (1 - nu^2) sigma2 and rate
        // nu^2 / (1 - nu^2) <= 2^{2R} - 1.
        const double g = std::expm1(2.0 * profile.at(1).finite_bits() * std::numbers::ln2);
        const long half = static_cast<long>(std::floor(1.5 / grid_step + 1e-9));
        double best_nu = 0.0;
        for (long i = -half; i <= half; ++i) {
            const double nu = static_cast<double>(i) * grid_step;
            if (nu * nu > 1.0 || nu * nu > g * (1.0 - nu * nu) * (1.0 + 1e-12)) continue;
            if (nu > best_nu + 1e-15) best_nu = nu;
        }
        FrameCoeffs fc;
        fc.frame_index = 1;
        fc.source_coeff = best_nu;
        fc.noise_var = (1.0 - best_nu * best_nu) * spec.sigma2;
        return detail::finish(kind, extend_joint(joint, fc), 1, SolverStatus::GridPolish);
    }

    const detail::FrameProgram p = detail::build_program(kind, j, profile.at(j), joint);
    const detail::Elimination e = detail::eliminate(p);
    const detail::GridResult g = detail::grid_search(p, e, grid_step);
    if (!g.found) throw InfeasibleError("grid feasibility", "no grid point satisfies the constraints");
    return detail::finish(kind, extend_joint(joint, p.coeffs(g.w)), j, SolverStatus::GridPolish);
}

}  // namespace rdp
