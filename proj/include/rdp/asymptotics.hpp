#pragma once

// Leading-order closed forms for the two small-rate regimes and the numeric
// measurement of their O(sqrt(eps)) remainders.
//
//   low_R1            R_1 = eps, R_2 given               (frame 2)
//   high_R1_low_rest  R_1 = inf, R_2 = R_3 = eps         (frames 2, 3)
//   high_R1_eps_inf   R_1 = inf, R_2 = eps, R_3 = inf    (frames 2, 3)
//
// Throughout s = sqrt(2 eps ln 2), the first-order value of
// sqrt(1 - 2^{-2 eps}).

#include "rdp/error.hpp"
#include "rdp/perception_metrics.hpp"
#include "rdp/rdp_solver.hpp"
#include "rdp/source_model.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace rdp {

enum class Regime { LowR1, HighR1LowRest, HighR1EpsInf };

inline std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::LowR1: return "low_R1";
        case Regime::HighR1LowRest: return "high_R1_low_rest";
        case Regime::HighR1EpsInf: return "high_R1_eps_inf";
    }
    return "?";
}

enum class R3Mode { Infinite, Eps };
enum class FmdBranch { Auto, LargeRho, SmallRho };

// FMD branch cannot be picked automatically for this (rho, eps).
class BranchAmbiguityError : public RegimeError {
public:
    using RegimeError::RegimeError;
};

// Coefficients (c_1..c_{j-1}, s) split as K_i + delta_i sqrt(2 eps ln 2).
struct AsymptoticExpansion {
    std::vector<double> constant_part;
    std::vector<double> sqrt_eps_part;
    Regime regime = Regime::LowR1;
};

struct AsymptoticFrame {
    int frame = 2;
    FrameCoeffs coeffs;
    AsymptoticExpansion expansion;
    double distortion = 0.0;
};

inline constexpr double kMaxAsymptoticEps = 0.05;

inline double sqrt_eps_scale(double eps) { return std::sqrt(2.0 * eps * std::numbers::ln2); }

namespace detail {

inline void check_eps(double eps) {
    if (!(eps >= 0.0)) throw ParameterError("eps must be >= 0");
    if (eps > kMaxAsymptoticEps) {
        throw RegimeError("eps = " + std::to_string(eps) + " exceeds the small-rate regime bound 0.05");
    }
}

inline void check_rho_sigma(double rho, double sigma2) {
    SourceSpec{rho, sigma2, 1}.validate();
}

inline FrameCoeffs make_coeffs(int j, std::vector<double> past, double src, double noise) {
    FrameCoeffs fc;
    fc.frame_index = j;
    fc.past_coeffs = std::move(past);
    fc.source_coeff = src;
    fc.noise_var = std::max(0.0, noise);
    return fc;
}

// Noise that matches Var(Xhat_j) = sigma2 given the linear part's variance
// (as a multiple of sigma2).
inline double matched_noise(double linear_var, double sigma2) { return (1.0 - linear_var) * sigma2; }

}  // namespace detail

inline AsymptoticFrame low_rate_frame2(PlfKind kind, Rate r2, double eps, double rho, double sigma2) {
    detail::check_eps(eps);
    detail::check_rho_sigma(rho, sigma2);
    if (!(r2.bits() >= 0.0)) throw ParameterError("rate must be >= 0");
    const double s = sqrt_eps_scale(eps);
    const double t2 = std::exp2(-2.0 * r2.finite_bits());
    const double q = 1.0 - t2;
    const double sq = std::sqrt(q);
    AsymptoticFrame out;
    out.expansion.regime = Regime::LowR1;
    switch (kind) {
        case PlfKind::SA: {
            // Exact frame-1 gain keeps the covariance match exact; nu = s + O(eps^1.5).
            const double nu = std::sqrt(-std::expm1(-2.0 * eps * std::numbers::ln2));
            const double w1 = rho * nu * (1.0 - sq);
            out.coeffs = detail::make_coeffs(2, {w1}, sq, t2 * (1.0 - rho * rho * nu * nu) * sigma2);
            out.expansion.constant_part = {0.0, sq};
            out.expansion.sqrt_eps_part = {rho * (1.0 - sq), 0.0};
            out.distortion = 2.0 * sigma2 * (1.0 - sq);
            break;
        }
        case PlfKind::FMD: {
            const double root = std::sqrt(q + rho * rho * s * s);
            const double w1 = root > 0.0 ? rho * s / root : 0.0;
            const double w2 = root > 0.0 ? q / root : 0.0;
            const double lin = w1 * w1 + w2 * w2 + 2.0 * rho * s * w1 * w2;
            out.coeffs = detail::make_coeffs(2, {w1}, w2, detail::matched_noise(lin, sigma2));
            out.expansion.constant_part = {0.0, sq};
            out.expansion.sqrt_eps_part = {sq > 0.0 ? rho / sq : 0.0, 0.0};
            out.distortion = 2.0 * sigma2 * (1.0 - root);
            break;
        }
        case PlfKind::JD: {
            const double inn = std::sqrt(1.0 - rho * rho);
            const double w2 = inn * sq;
            const double w1 = rho - rho * w2 * s;
            out.coeffs = detail::make_coeffs(2, {w1}, w2, ((1.0 - rho * rho) * t2 - rho * rho * inn * sq * s) * sigma2);
            out.expansion.constant_part = {rho, w2};
            out.expansion.sqrt_eps_part = {-rho * w2, 0.0};
            out.distortion = 2.0 * sigma2 * (1.0 - inn * sq - rho * rho * s);
            break;
        }
    }
    return out;
}

inline FmdBranch select_fmd_branch(double rho, double eps) {
    const double s = sqrt_eps_scale(eps);
    if (rho > 3.0 * s) return FmdBranch::LargeRho;
    if (rho < s / 3.0) return FmdBranch::SmallRho;
    throw BranchAmbiguityError("rho = " + std::to_string(rho) + " is within a factor 3 of sqrt(2 eps ln 2) = " +
                               std::to_string(s) + "; choose the FMD branch explicitly");
}

// Frames 2 and 3 with R_1 = inf and R_2 = eps; R_3 is inf or eps.
inline std::vector<AsymptoticFrame> high_rate_frames(PlfKind kind, double rho, double eps, R3Mode r3_mode,
                                                     double sigma2 = 1.0, FmdBranch branch = FmdBranch::Auto) {
    detail::check_eps(eps);
    detail::check_rho_sigma(rho, sigma2);
    const double s = sqrt_eps_scale(eps);
    const double e2 = s * s;  // 2 eps ln 2
    const double rho2 = rho * rho;
    const double rho4 = rho2 * rho2;
    const Regime regime = r3_mode == R3Mode::Infinite ? Regime::HighR1EpsInf : Regime::HighR1LowRest;

    AsymptoticFrame f2;
    f2.frame = 2;
    f2.expansion.regime = regime;
    AsymptoticFrame f3;
    f3.frame = 3;
    f3.expansion.regime = regime;

    if (kind == PlfKind::FMD) {
        if (branch == FmdBranch::Auto) branch = select_fmd_branch(rho, eps);
        if (branch == FmdBranch::LargeRho) {
            if (!(rho > 0.0)) throw RegimeError("large-rho FMD branch needs rho > 0");
            const double w1 = 1.0 - (1.0 + rho2) * e2 / (2.0 * rho2);
            const double w2 = e2 / rho;
            f2.coeffs = detail::make_coeffs(2, {w1}, w2,
                                            detail::matched_noise(w1 * w1 + w2 * w2 + 2.0 * rho * w1 * w2, sigma2));
            f2.expansion.constant_part = {1.0, 0.0};
            f2.expansion.sqrt_eps_part = {0.0, 0.0};
            f2.distortion = 2.0 * sigma2 * (1.0 - rho);
        } else {
            f2.coeffs = detail::make_coeffs(2, {0.0}, s, (1.0 - e2) * sigma2);
            f2.expansion.constant_part = {0.0, 0.0};
            f2.expansion.sqrt_eps_part = {0.0, 1.0};
            f2.distortion = 2.0 * sigma2 * (1.0 - s);
        }
        if (r3_mode == R3Mode::Infinite) {
            f3.coeffs = detail::make_coeffs(3, {0.0, 0.0}, 1.0, 0.0);
            f3.expansion.constant_part = {0.0, 0.0, 1.0};
            f3.expansion.sqrt_eps_part = {0.0, 0.0, 0.0};
            f3.distortion = 0.0;
        } else if (branch == FmdBranch::LargeRho) {
            const double rho8 = rho4 * rho4;
            // At rho = 1 every frame equals X_1 and the O(eps) corrections vanish.
            const bool unit = rho >= 1.0;
            const double d3 = unit ? 0.0 : (1.0 - 2.0 / 3.0 * rho4) / (2.0 / 3.0 * rho2 * (1.0 - rho4));
            const double d1 =
                unit ? 0.0 : (3.0 - 4.0 * rho8) / (8.0 * rho4 * (1.0 - rho4)) + (1.0 - rho2) / (24.0 * rho2);
            const double t12 = 0.5 - d1 * e2;
            const double t3 = d3 * e2;
            const Eigen::Vector3d w(t12, t12, t3);
            // Cov of (Xhat_1, Xhat_2, X_3) with Xhat_1 = X_1 and frame 2 as above.
            const double w1 = f2.coeffs.past_coeffs[0];
            const double w2 = f2.coeffs.source_coeff;
            Eigen::Matrix3d m;
            m << 1.0, w1 + w2 * rho, rho2, w1 + w2 * rho, 1.0, w1 * rho2 + w2 * rho, rho2, w1 * rho2 + w2 * rho, 1.0;
            f3.coeffs = detail::make_coeffs(3, {t12, t12}, t3, detail::matched_noise(w.dot(m * w), sigma2));
            f3.expansion.constant_part = {0.5, 0.5, 0.0};
            f3.expansion.sqrt_eps_part = {0.0, 0.0, 0.0};
            f3.distortion = 2.0 * sigma2 * (1.0 - rho2);
        } else {
            f3.coeffs = detail::make_coeffs(3, {0.0, 0.0}, s, (1.0 - e2) * sigma2);
            f3.expansion.constant_part = {0.0, 0.0, 0.0};
            f3.expansion.sqrt_eps_part = {0.0, 0.0, 1.0};
            f3.distortion = 2.0 * sigma2 * (1.0 - s);
        }
        return {f2, f3};
    }

    // SA and JD share frame 2.
    const double w1 = rho - rho * s;
    const double w2 = s;
    f2.coeffs = detail::make_coeffs(2, {w1}, w2, detail::matched_noise(w1 * w1 + w2 * w2 + 2.0 * rho * w1 * w2, sigma2));
    f2.expansion.constant_part = {rho, 0.0};
    f2.expansion.sqrt_eps_part = {-rho, 1.0};
    f2.distortion = 2.0 * sigma2 * (1.0 - rho2);

    const double c12 = w1 + w2 * rho;          // Cov(Xhat_1, Xhat_2)
    const double c2x3 = w1 * rho2 + w2 * rho;  // Cov(Xhat_2, X_3)
    auto linear_var = [&](double t1, double t2, double t3) {
        return t1 * t1 + t2 * t2 + t3 * t3 + 2.0 * t1 * t2 * c12 + 2.0 * t1 * t3 * rho2 + 2.0 * t2 * t3 * c2x3;
    };
    const double inv = 1.0 / std::sqrt(1.0 + rho2);
    if (kind == PlfKind::SA) {
        if (r3_mode == R3Mode::Infinite) {
            f3.coeffs = detail::make_coeffs(3, {0.0, 0.0}, 1.0, 0.0);
            f3.expansion.constant_part = {0.0, 0.0, 1.0};
            f3.expansion.sqrt_eps_part = {0.0, 0.0, 0.0};
            f3.distortion = 0.0;
        } else {
            const double t1 = rho2 - 2.0 * rho2 * s;
            const double t2 = rho * s;
            const double t3 = s;
            f3.coeffs = detail::make_coeffs(3, {t1, t2}, t3, detail::matched_noise(linear_var(t1, t2, t3), sigma2));
            f3.expansion.constant_part = {rho2, 0.0, 0.0};
            f3.expansion.sqrt_eps_part = {-2.0 * rho2, rho, 1.0};
            f3.distortion = 2.0 * sigma2 * (1.0 - rho4);
        }
    } else {
        if (r3_mode == R3Mode::Infinite) {
            const double t1 = -rho2 * inv;
            const double t2 = rho;
            const double t3 = inv;
            f3.coeffs = detail::make_coeffs(3, {t1, t2}, t3, detail::matched_noise(linear_var(t1, t2, t3), sigma2));
            f3.expansion.constant_part = {t1, t2, t3};
            f3.expansion.sqrt_eps_part = {0.0, 0.0, 0.0};
            f3.distortion = 2.0 * sigma2 * (1.0 - rho4) * (1.0 - inv);
        } else {
            const double t1 = -rho2 * s * inv;
            const double t2 = rho;
            const double t3 = s * inv;
            f3.coeffs = detail::make_coeffs(3, {t1, t2}, t3, detail::matched_noise(linear_var(t1, t2, t3), sigma2));
            f3.expansion.constant_part = {0.0, rho, 0.0};
            f3.expansion.sqrt_eps_part = {-rho2 * inv, 0.0, inv};
            f3.distortion = 2.0 * sigma2 * (1.0 - rho4);
        }
    }
    return {f2, f3};
}

// Frame j >= 2 with R_1 = inf and every later rate eps. Geometric sums are
// accumulated term by term, so rho = 1 needs no special case.
inline double frame_j_high_rate(PlfKind kind, int j, double rho, double eps, double sigma2 = 1.0) {
    detail::check_eps(eps);
    detail::check_rho_sigma(rho, sigma2);
    if (j < 2) throw ParameterError("frame_j_high_rate needs j >= 2");
    if (kind == PlfKind::FMD) throw ParameterError("frame_j_high_rate covers SA and JD only");
    const double s = sqrt_eps_scale(eps);
    const double rho2 = rho * rho;
    const double lead = std::pow(rho2, j - 1);
    double tail = 0.0;  // sum_{i=1}^{j-2} rho^{2(j-1-i)}
    for (int i = 1; i <= j - 2; ++i) tail += std::pow(rho2, j - 1 - i);
    if (kind == PlfKind::SA) {
        const double full = tail + 1.0;  // i = j-1 term
        return 2.0 * sigma2 * (1.0 - lead - s * (1.0 - rho2) * full);
    }
    const double geo = tail + 1.0;  // (1 - rho^{2(j-1)}) / (1 - rho^2)
    return 2.0 * sigma2 * (1.0 - lead - s * (1.0 - rho2) * (std::sqrt(geo) + tail));
}

struct GapFit {
    double C = 0.0;
    double fit_residual = 0.0;  // ||gap - C sqrt(eps)|| / (sigma2 ||sqrt(eps)||)
    std::vector<double> eps;
    std::vector<double> gaps;
    std::vector<double> numeric;
    std::vector<double> asymptotic;
};

// Asymptotic distortion of frame j in the given regime.
inline double asymptotic_distortion(PlfKind kind, int j, Regime regime, double eps, double rho, double sigma2,
                                    Rate low_r2 = Rate(1.0), FmdBranch branch = FmdBranch::Auto) {
    if (regime == Regime::LowR1) {
        if (j != 2) throw ParameterError("low-R1 closed forms cover frame 2 only");
        return low_rate_frame2(kind, low_r2, eps, rho, sigma2).distortion;
    }
    if (j != 2 && j != 3) throw ParameterError("high-R1 closed forms cover frames 2 and 3");
    const R3Mode mode = regime == Regime::HighR1EpsInf ? R3Mode::Infinite : R3Mode::Eps;
    return high_rate_frames(kind, rho, eps, mode, sigma2, branch)[static_cast<std::size_t>(j - 2)].distortion;
}

// Rate profile the numeric solve uses for a regime at this eps.
inline RateProfile regime_profile(Regime regime, int j, double eps, Rate low_r2 = Rate(1.0)) {
    RateProfile p;
    if (regime == Regime::LowR1) {
        p.rates = {Rate(eps), low_r2};
    } else {
        p.rates = {Rate::infinite(), Rate(eps)};
        if (j >= 3) p.rates.push_back(regime == Regime::HighR1EpsInf ? Rate::infinite() : Rate(eps));
    }
    return p;
}

// Least-squares fit of |D_numeric - D_asymptotic| = C sqrt(eps) through the
// origin. Throws RegimeError when gap / sqrt(eps) grows as eps shrinks.
inline GapFit asymptotic_gap(PlfKind kind, int j, Regime regime, const std::vector<double>& eps_list, double rho,
                             double sigma2, Rate low_r2 = Rate(1.0), FmdBranch branch = FmdBranch::Auto,
                             const SolverOptions& opts = {}) {
    if (eps_list.empty()) throw ParameterError("eps_list is empty");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] >= 1e-6)) throw ParameterError("eps values must be >= 1e-6");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw ParameterError("eps_list must be decreasing");
    }
    GapFit fit;
    double num = 0.0;
    double den = 0.0;
    for (double eps : eps_list) {
        const double asym = asymptotic_distortion(kind, j, regime, eps, rho, sigma2, low_r2, branch);
        const RateProfile prof = regime_profile(regime, j, eps, low_r2);
        const HorizonSolution h = solve_horizon(kind, prof, SourceSpec{rho, sigma2, prof.size()}, opts);
        const double numeric = h.frames[static_cast<std::size_t>(j - 1)].distortion;
        const double gap = std::abs(numeric - asym);
        fit.eps.push_back(eps);
        fit.gaps.push_back(gap);
        fit.numeric.push_back(numeric);
        fit.asymptotic.push_back(asym);
        num += gap * std::sqrt(eps);
        den += eps;
    }
    fit.C = num / den;
    double res2 = 0.0;
    for (std::size_t i = 0; i < fit.eps.size(); ++i) {
        const double r = fit.gaps[i] - fit.C * std::sqrt(fit.eps[i]);
        res2 += r * r;
    }
    fit.fit_residual = std::sqrt(res2) / (sigma2 * std::sqrt(den));
    const double first = fit.gaps.front() / std::sqrt(fit.eps.front());
    const double last = fit.gaps.back() / std::sqrt(fit.eps.back());
    if (fit.eps.size() > 1 && last > 2.0 * first + 1e-9) {
        throw RegimeError("gap / sqrt(eps) grows from " + std::to_string(first) + " to " + std::to_string(last) +
                          " as eps shrinks");
    }
    return fit;
}

}  // namespace rdp
