#pragma once

// Quadratic program of one frame j >= 2 in the stacked coefficients
// w = (c_1, ..., c_{j-1}, s) on Y = (Xhat_1, ..., Xhat_{j-1}, X_j).
//
//   maximize   m' w                      (D = 2 sigma2 - 2 m' w)
//   subject to A w = d                   (covariance match of the PLF)
//              w' Q w <= sigma2          (variance match + rate)
//
// with M = Cov(Y), m = M e_last, v = Var(X_j | Xhat_{<j}), g = 2^{2R} - 1 and
// Q = M + (v / g) e_last e_last'. The variance match pins
// alpha^2 = sigma2 - w' M w, and the rate inequality s^2 v <= g alpha^2 is
// then equivalent to w' Q w <= sigma2.

#include "rdp/error.hpp"
#include "rdp/linalg.hpp"
#include "rdp/perception_metrics.hpp"
#include "rdp/source_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace rdp {

// Rates below this are raised to it before entering 2^{2R} - 1.
inline constexpr double kMinRateBits = 1e-6;

// Bits actually used inside the solver for a requested rate.
inline double effective_rate_bits(Rate r) {
    if (!(r.bits() >= 0.0)) throw ParameterError("rate must be >= 0");
    return std::max(r.finite_bits(), kMinRateBits);
}

namespace detail {

struct FrameProgram {
    int j = 2;
    int k = 2;
    double sigma2 = 1.0;
    double rate_bits = 0.0;
    double g = 0.0;
    double v = 0.0;
    Eigen::MatrixXd M;
    Eigen::MatrixXd Q;
    Eigen::VectorXd m;
    Eigen::MatrixXd A;  // zero rows for FMD
    Eigen::VectorXd d;

    [[nodiscard]] double quad(const Eigen::VectorXd& w) const {
        double acc = 0.0;
        for (int a = 0; a < k; ++a) {
            double row = 0.0;
            for (int b = 0; b < k; ++b) row += Q(a, b) * w(b);
            acc += w(a) * row;
        }
        return acc;
    }
    [[nodiscard]] double distortion(const Eigen::VectorXd& w) const { return 2.0 * sigma2 - 2.0 * m.dot(w); }

    [[nodiscard]] bool feasible(const Eigen::VectorXd& w, double rel_tol = 1e-12) const {
        return quad(w) <= sigma2 * (1.0 + rel_tol);
    }

    // Noise variance for a feasible w: the variance match, raised if rounding
    // left it under the rate floor s^2 v / g.
    [[nodiscard]] double alpha2(const Eigen::VectorXd& w) const {
        const double s = w(k - 1);
        const double match = sigma2 - w.dot(M * w);
        return std::max({match, s * s * v / g, 0.0});
    }

    [[nodiscard]] FrameCoeffs coeffs(const Eigen::VectorXd& w) const {
        FrameCoeffs fc;
        fc.frame_index = j;
        fc.past_coeffs.assign(w.data(), w.data() + (k - 1));
        fc.source_coeff = w(k - 1);
        fc.noise_var = alpha2(w);
        return fc;
    }
};

inline FrameProgram build_program(PlfKind kind, int j, Rate rate, const JointGaussian& joint) {
    if (j < 2) throw ShapeError("frame program needs j >= 2");
    if (joint.reconstructed() < j - 1) throw ShapeError("prefix lacks frames before " + std::to_string(j));
    FrameProgram p;
    p.j = j;
    p.k = j;
    p.sigma2 = joint.spec().sigma2;
    p.rate_bits = effective_rate_bits(rate);
    p.g = std::expm1(2.0 * p.rate_bits * std::numbers::ln2);

    std::vector<int> y = joint.past_recon_indices(j);
    y.push_back(joint.source_index(j));
    p.M = joint.block(y);
    p.m = p.M.col(p.k - 1);
    p.v = conditional_variance(joint, joint.source_index(j), joint.past_recon_indices(j));
    p.Q = p.M;
    p.Q(p.k - 1, p.k - 1) += p.v / p.g;

    const int past = j - 1;
    switch (kind) {
        case PlfKind::FMD:
            p.A.resize(0, p.k);
            p.d.resize(0);
            break;
        case PlfKind::SA:
            p.A = p.M.topRows(past);
            p.d = p.m.head(past);
            break;
        case PlfKind::JD:
            p.A = p.M.topRows(past);
            p.d.resize(past);
            for (int i = 1; i < j; ++i) p.d(i - 1) = joint.spec().source_cov(j, i);
            break;
    }
    return p;
}

// Splits the equality system into pivot and free coordinates. Pivots are
// taken greedily from the highest-index past coefficient down, then s.
struct Elimination {
    std::vector<int> pivots;
    std::vector<int> free;
    Eigen::MatrixXd pivot_pinv;  // pseudo-inverse of A[:, pivots]
    Eigen::MatrixXd a_free;
    Eigen::MatrixXd a_piv;
    Eigen::VectorXd d;
    double tol = 1e-9;

    // Fills w from the free values; false if the equalities cannot be met.
    bool complete(const double* free_vals, Eigen::VectorXd& w) const {
        const int nf = static_cast<int>(free.size());
        for (int f = 0; f < nf; ++f) w(free[static_cast<std::size_t>(f)]) = free_vals[f];
        if (pivots.empty()) return true;
        Eigen::VectorXd rhs = d;
        for (int f = 0; f < nf; ++f) rhs -= a_free.col(f) * free_vals[f];
        const Eigen::VectorXd xp = pivot_pinv * rhs;
        if ((a_piv * xp - rhs).lpNorm<Eigen::Infinity>() > tol) return false;
        for (std::size_t q = 0; q < pivots.size(); ++q) w(pivots[q]) = xp(static_cast<Eigen::Index>(q));
        return true;
    }
};

inline int numeric_rank(const Eigen::MatrixXd& a, double rel = 1e-10) {
    if (a.size() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > rel * sv(0)) ++r;
    }
    return r;
}

inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& a, double rel = 1e-10) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(0) > 0.0 && sv(i) > rel * sv(0)) inv(i) = 1.0 / sv(i);
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline Elimination eliminate(const FrameProgram& p) {
    Elimination e;
    e.d = p.d;
    e.tol = 1e-9 * p.sigma2;
    const int total_rank = numeric_rank(p.A);
    std::vector<int> order;
    for (int c = p.k - 2; c >= 0; --c) order.push_back(c);
    order.push_back(p.k - 1);
    for (int c : order) {
        if (static_cast<int>(e.pivots.size()) == total_rank) break;
        std::vector<int> trial = e.pivots;
        trial.push_back(c);
        Eigen::MatrixXd sub(p.A.rows(), static_cast<Eigen::Index>(trial.size()));
        for (std::size_t q = 0; q < trial.size(); ++q) sub.col(static_cast<Eigen::Index>(q)) = p.A.col(trial[q]);
        if (numeric_rank(sub) == static_cast<int>(trial.size())) e.pivots = trial;
    }
    for (int c = 0; c < p.k; ++c) {
        if (std::find(e.pivots.begin(), e.pivots.end(), c) == e.pivots.end()) e.free.push_back(c);
    }
    e.a_piv.resize(p.A.rows(), static_cast<Eigen::Index>(e.pivots.size()));
    for (std::size_t q = 0; q < e.pivots.size(); ++q) e.a_piv.col(static_cast<Eigen::Index>(q)) = p.A.col(e.pivots[q]);
    e.a_free.resize(p.A.rows(), static_cast<Eigen::Index>(e.free.size()));
    for (std::size_t q = 0; q < e.free.size(); ++q) e.a_free.col(static_cast<Eigen::Index>(q)) = p.A.col(e.free[q]);
    if (!e.pivots.empty()) e.pivot_pinv = pinv(e.a_piv);
    return e;
}

struct GridResult {
    bool found = false;
    double distortion = 0.0;
    Eigen::VectorXd w;
};

// Exhaustive grid over the free coordinates in [-box, box]. The grid always
// contains 0. Ties keep the lexicographically smallest free vector.
inline GridResult grid_search(const FrameProgram& p, const Elimination& e, double step, double box = 1.5) {
    if (!(step > 0.0)) throw ParameterError("grid_step must be positive");
    const int nf = static_cast<int>(e.free.size());
    if (nf > 3) throw ParameterError("grid search supports at most 3 free coefficients");
    const long half = static_cast<long>(std::floor(box / step + 1e-9));
    const long per_axis = 2 * half + 1;
    long total = 1;
    for (int f = 0; f < nf; ++f) total *= per_axis;

    GridResult best;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p.k);
    std::vector<long> idx(static_cast<std::size_t>(nf), 0);
    double vals[3] = {0.0, 0.0, 0.0};
    for (long n = 0; n < total; ++n) {
        long rem = n;
        for (int f = nf - 1; f >= 0; --f) {
            idx[static_cast<std::size_t>(f)] = rem % per_axis;
            rem /= per_axis;
            vals[f] = static_cast<double>(idx[static_cast<std::size_t>(f)] - half) * step;
        }
        if (!e.complete(vals, w)) continue;
        if (!p.feasible(w)) continue;
        const double dist = p.distortion(w);
        if (!best.found || dist < best.distortion - 1e-12 * p.sigma2) {
            best.found = true;
            best.distortion = dist;
            best.w = w;
        }
    }
    return best;
}

// Pattern search on the free coordinates starting from a feasible w.
inline GridResult compass_polish(const FrameProgram& p, const Elimination& e, const Eigen::VectorXd& start,
                                 double step, double min_step, int max_iter) {
    GridResult cur;
    if (!p.feasible(start)) return cur;
    cur.found = true;
    cur.w = start;
    cur.distortion = p.distortion(start);
    const int nf = static_cast<int>(e.free.size());
    std::vector<double> x(static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f) x[static_cast<std::size_t>(f)] = start(e.free[static_cast<std::size_t>(f)]);
    Eigen::VectorXd w = start;
    for (int it = 0; it < max_iter && step >= min_step; ++it) {
        bool improved = false;
        for (int f = 0; f < nf && !improved; ++f) {
            for (double sign : {1.0, -1.0}) {
                std::vector<double> trial = x;
                trial[static_cast<std::size_t>(f)] += sign * step;
                if (!e.complete(trial.data(), w) || !p.feasible(w)) continue;
                const double dist = p.distortion(w);
                if (dist < cur.distortion - 1e-15) {
                    x = trial;
                    cur.w = w;
                    cur.distortion = dist;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    return cur;
}

}  // namespace detail
}  // namespace rdp
