#pragma once

// Monte-Carlo sampling of the source and a reconstruction policy, and the
// comparison of the resulting statistics with the analytic joint law.

#include "rdp/error.hpp"
#include "rdp/perception_metrics.hpp"
#include "rdp/rdp_solver.hpp"
#include "rdp/source_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace rdp {

struct EmpiricalStats {
    long n = 0;
    std::vector<double> per_frame_mse;
    std::vector<double> stderr_mse;
    Eigen::MatrixXd emp_cov;  // over X_1..X_T, Xhat_1..Xhat_T
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Counter-based: the draw depends only on (seed, trajectory, stream).
inline double counter_uniform(std::uint64_t seed, std::uint64_t traj, std::uint64_t stream) {
    const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ traj) ^ (stream * 0xD1B54A32D192ED03ULL));
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;  // (0, 1)
}

inline double counter_normal(std::uint64_t seed, std::uint64_t traj, std::uint64_t stream) {
    const double u1 = counter_uniform(seed, traj, 2 * stream);
    const double u2 = counter_uniform(seed, traj, 2 * stream + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Running sums of one block of trajectories.
struct Moments {
    Eigen::VectorXd sum;
    Eigen::MatrixXd outer;
    Eigen::VectorXd err;
    Eigen::VectorXd err2;

    explicit Moments(int dim, int frames)
        : sum(Eigen::VectorXd::Zero(dim)),
          outer(Eigen::MatrixXd::Zero(dim, dim)),
          err(Eigen::VectorXd::Zero(frames)),
          err2(Eigen::VectorXd::Zero(frames)) {}

    void add(const Moments& o) {
        sum += o.sum;
        outer += o.outer;
        err += o.err;
        err2 += o.err2;
    }
};

// Pairwise reduction over block results in fixed order.
inline Moments pairwise(std::vector<Moments>& blocks, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return blocks[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    Moments a = pairwise(blocks, lo, mid);
    a.add(pairwise(blocks, mid, hi));
    return a;
}

inline constexpr long kBlockSize = 4096;

}  // namespace detail

inline EmpiricalStats simulate(const SourceSpec& spec, const ReconPolicy& policy, long n, std::uint64_t seed) {
    spec.validate();
    policy.validate();
    if (n < 2) throw ParameterError("simulate needs n >= 2");
    if (policy.size() != spec.horizon) {
        throw ShapeError("policy covers " + std::to_string(policy.size()) + " frames, horizon is " +
                         std::to_string(spec.horizon));
    }
    const int t = spec.horizon;
    const int dim = 2 * t;
    const double sd = std::sqrt(spec.sigma2);
    const double innov_sd = std::sqrt(spec.innovation_variance());
    std::vector<double> noise_sd(static_cast<std::size_t>(t));
    for (int j = 0; j < t; ++j) noise_sd[static_cast<std::size_t>(j)] = std::sqrt(policy.frames[static_cast<std::size_t>(j)].noise_var);

    const long nblocks = (n + detail::kBlockSize - 1) / detail::kBlockSize;
    std::vector<detail::Moments> blocks;
    blocks.reserve(static_cast<std::size_t>(nblocks));
    Eigen::VectorXd z(dim);
    for (long b = 0; b < nblocks; ++b) {
        detail::Moments mo(dim, t);
        const long end = std::min(n, (b + 1) * detail::kBlockSize);
        for (long i = b * detail::kBlockSize; i < end; ++i) {
            const auto traj = static_cast<std::uint64_t>(i);
            z(0) = sd * detail::counter_normal(seed, traj, 0);
            for (int j = 1; j < t; ++j) {
                z(j) = spec.rho * z(j - 1) + innov_sd * detail::counter_normal(seed, traj, static_cast<std::uint64_t>(j));
            }
            for (int j = 0; j < t; ++j) {
                const FrameCoeffs& fc = policy.frames[static_cast<std::size_t>(j)];
                double xh = fc.source_coeff * z(j);
                for (int i2 = 0; i2 < j; ++i2) xh += fc.past_coeffs[static_cast<std::size_t>(i2)] * z(t + i2);
                xh += noise_sd[static_cast<std::size_t>(j)] *
                      detail::counter_normal(seed, traj, static_cast<std::uint64_t>(t + j));
                z(t + j) = xh;
                const double e = z(j) - xh;
                mo.err(j) += e * e;
                mo.err2(j) += e * e * e * e;
            }
            mo.sum += z;
            mo.outer.noalias() += z * z.transpose();
        }
        blocks.push_back(std::move(mo));
    }
    const detail::Moments tot = detail::pairwise(blocks, 0, blocks.size());

    EmpiricalStats st;
    st.n = n;
    const double nn = static_cast<double>(n);
    const Eigen::VectorXd mean = tot.sum / nn;
    st.emp_cov = (tot.outer - nn * mean * mean.transpose()) / (nn - 1.0);
    st.emp_cov = 0.5 * (st.emp_cov + st.emp_cov.transpose());
    for (int j = 0; j < t; ++j) {
        const double m = tot.err(j) / nn;
        const double var = std::max(0.0, (tot.err2(j) - nn * m * m) / (nn - 1.0));
        st.per_frame_mse.push_back(m);
        st.stderr_mse.push_back(std::sqrt(var / nn));
    }
    return st;
}

struct ValidationItem {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

struct ValidationReport {
    std::vector<ValidationItem> items;
    bool low_power = false;
    [[nodiscard]] bool passed() const {
        return std::all_of(items.begin(), items.end(), [](const ValidationItem& i) { return i.pass; });
    }
};

inline constexpr double kZThreshold = 4.0;
inline constexpr double kCovTolFraction = 0.01;
inline constexpr long kLowPowerN = 10000;

// Tolerance for covariance-type items: 0.01 sigma2, widened at small n to
// four standard errors of a sample covariance entry (sqrt(2/n) sigma2).
inline double covariance_tolerance(long n, double sigma2) {
    return std::max(kCovTolFraction, kZThreshold * std::sqrt(2.0 / static_cast<double>(n))) * sigma2;
}

inline ValidationReport validate_solution(const EmpiricalStats& stats, const JointGaussian& analytic,
                                          const std::vector<FrameSolution>& solutions) {
    if (stats.emp_cov.rows() != analytic.dim()) throw ShapeError("statistics and analytic joint differ in size");
    if (static_cast<int>(solutions.size()) > analytic.reconstructed()) {
        throw ShapeError("more solutions than reconstructed frames");
    }
    if (stats.per_frame_mse.size() < solutions.size()) throw ShapeError("statistics lack frames");
    const double sigma2 = analytic.spec().sigma2;
    ValidationReport rep;
    rep.low_power = stats.n < kLowPowerN;

    for (std::size_t i = 0; i < solutions.size(); ++i) {
        const int j = static_cast<int>(i) + 1;
        const double exact = frame_distortion(analytic, j);
        const double se = stats.stderr_mse[i];
        const double diff = stats.per_frame_mse[i] - exact;
        double z = 0.0;
        if (se > 0.0) {
            z = diff / se;
        } else if (std::abs(diff) > 1e-12 * sigma2) {
            z = std::copysign(std::numeric_limits<double>::infinity(), diff);
        }
        rep.items.push_back({"mse_z[" + std::to_string(j) + "]", z, kZThreshold, std::abs(z) <= kZThreshold});
    }

    const double tol = covariance_tolerance(stats.n, sigma2);
    const double dev = (stats.emp_cov - analytic.cov()).cwiseAbs().maxCoeff();
    rep.items.push_back({"cov_max_dev", dev, tol, dev <= tol});

    const JointGaussian empirical(analytic.spec(), analytic.labels(), stats.emp_cov, analytic.recon());
    for (std::size_t i = 0; i < solutions.size(); ++i) {
        const int j = static_cast<int>(i) + 1;
        const double r = plf_residual(solutions[i].kind, empirical, j);
        rep.items.push_back({"plf_residual[" + std::to_string(j) + "," + std::string(to_string(solutions[i].kind)) + "]",
                             r, tol, r <= tol});
    }
    return rep;
}

}  // namespace rdp
