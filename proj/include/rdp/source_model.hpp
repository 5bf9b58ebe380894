#pragma once

// Joint Gaussian law of a Gauss-Markov source X_1..X_T and of the
// reconstructions produced by a linear-Gaussian reconstruction policy
//
//   Xhat_j = sum_{i<j} c_i Xhat_i + s X_j + Z_j,   Z_j ~ N(0, alpha_j^2),
//
// plus exact per-frame rate and distortion evaluated from that law.

#include "rdp/error.hpp"
#include "rdp/linalg.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rdp {

inline constexpr int kMaxHorizon = 16;

// Rate in bits. Infinity is a legal value; wherever a finite number is needed
// it is replaced by kInfiniteRateBits (2^-60 sits below every tolerance).
class Rate {
public:
    static constexpr double kInfiniteRateBits = 30.0;

    constexpr Rate() = default;
    constexpr explicit Rate(double bits) : bits_(bits) {}

    static constexpr Rate infinite() { return Rate(std::numeric_limits<double>::infinity()); }

    [[nodiscard]] constexpr double bits() const { return bits_; }
    [[nodiscard]] bool is_infinite() const { return std::isinf(bits_) && bits_ > 0; }
    [[nodiscard]] double finite_bits() const { return is_infinite() ? kInfiniteRateBits : bits_; }

    friend constexpr bool operator==(Rate, Rate) = default;

private:
    double bits_ = 0.0;
};

struct SourceSpec {
    double rho = 0.0;
    double sigma2 = 1.0;
    int horizon = 1;

    // Throws ParameterError unless 0 <= rho <= 1, sigma2 > 0, 1 <= horizon <= 16.
    void validate() const {
        if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("rho must lie in [0, 1]");
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ParameterError("sigma2 must be positive and finite");
        if (horizon < 1 || horizon > kMaxHorizon) {
            throw ParameterError("horizon must lie in [1, " + std::to_string(kMaxHorizon) + "]");
        }
    }

    [[nodiscard]] double innovation_variance() const { return (1.0 - rho * rho) * sigma2; }

    // Cov(X_i, X_k) for 1-based frame indices.
    [[nodiscard]] double source_cov(int i, int k) const {
        return std::pow(rho, std::abs(i - k)) * sigma2;
    }
};

// Reconstruction rule of frame j.
struct FrameCoeffs {
    int frame_index = 1;
    std::vector<double> past_coeffs;  // on Xhat_1..Xhat_{j-1}
    double source_coeff = 0.0;        // on X_j
    double noise_var = 0.0;           // alpha_j^2

    void validate() const {
        if (frame_index < 1) throw ShapeError("frame_index must be >= 1");
        if (static_cast<int>(past_coeffs.size()) != frame_index - 1) {
            throw ShapeError("frame " + std::to_string(frame_index) + " needs " +
                             std::to_string(frame_index - 1) + " past coefficients");
        }
        if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) throw ParameterError("noise_var must be >= 0");
        for (double c : past_coeffs) {
            if (!std::isfinite(c)) throw ParameterError("past coefficient is not finite");
        }
        if (!std::isfinite(source_coeff)) throw ParameterError("source coefficient is not finite");
    }

    // Coefficients stacked as (c_1, ..., c_{j-1}, s).
    [[nodiscard]] Eigen::VectorXd stacked() const {
        Eigen::VectorXd w(frame_index);
        for (int i = 0; i + 1 < frame_index; ++i) w(i) = past_coeffs[static_cast<std::size_t>(i)];
        w(frame_index - 1) = source_coeff;
        return w;
    }
};

struct ReconPolicy {
    std::vector<FrameCoeffs> frames;

    void validate() const {
        for (std::size_t i = 0; i < frames.size(); ++i) {
            if (frames[i].frame_index != static_cast<int>(i) + 1) {
                throw ShapeError("policy frame " + std::to_string(i + 1) + " carries index " +
                                 std::to_string(frames[i].frame_index));
            }
            frames[i].validate();
        }
    }

    [[nodiscard]] int size() const { return static_cast<int>(frames.size()); }
};

// Zero-mean covariance over X_1..X_T followed by every Xhat_j built so far.
class JointGaussian {
public:
    JointGaussian(SourceSpec spec, std::vector<std::string> labels, Eigen::MatrixXd cov,
                  std::vector<FrameCoeffs> recon)
        : spec_(spec), labels_(std::move(labels)), cov_(std::move(cov)), recon_(std::move(recon)) {}

    [[nodiscard]] const SourceSpec& spec() const { return spec_; }
    [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }
    [[nodiscard]] const Eigen::MatrixXd& cov() const { return cov_; }
    [[nodiscard]] const std::vector<FrameCoeffs>& recon() const { return recon_; }

    [[nodiscard]] int horizon() const { return spec_.horizon; }
    [[nodiscard]] int reconstructed() const { return static_cast<int>(recon_.size()); }
    [[nodiscard]] int dim() const { return static_cast<int>(cov_.rows()); }

    [[nodiscard]] int source_index(int j) const {
        if (j < 1 || j > horizon()) throw ShapeError("source frame " + std::to_string(j) + " out of range");
        return j - 1;
    }

    [[nodiscard]] int recon_index(int j) const {
        if (j < 1 || j > reconstructed()) {
            throw ShapeError("reconstruction of frame " + std::to_string(j) + " not present");
        }
        return horizon() + j - 1;
    }

    [[nodiscard]] int index_of(std::string_view label) const {
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i] == label) return static_cast<int>(i);
        }
        throw ShapeError("unknown label '" + std::string(label) + "'");
    }

    [[nodiscard]] Eigen::MatrixXd block(const std::vector<int>& idx) const {
        Eigen::MatrixXd out(idx.size(), idx.size());
        for (std::size_t a = 0; a < idx.size(); ++a) {
            for (std::size_t b = 0; b < idx.size(); ++b) out(a, b) = cov_(idx[a], idx[b]);
        }
        return out;
    }

    [[nodiscard]] const FrameCoeffs& coeffs(int j) const {
        (void)recon_index(j);
        return recon_[static_cast<std::size_t>(j - 1)];
    }

    // Indices of Xhat_1..Xhat_{j-1}.
    [[nodiscard]] std::vector<int> past_recon_indices(int j) const {
        std::vector<int> idx;
        for (int i = 1; i < j; ++i) idx.push_back(recon_index(i));
        return idx;
    }

private:
    SourceSpec spec_;
    std::vector<std::string> labels_;
    Eigen::MatrixXd cov_;
    std::vector<FrameCoeffs> recon_;
};

inline std::string source_label(int j) { return "X" + std::to_string(j); }
inline std::string recon_label(int j) { return "Xhat" + std::to_string(j); }

inline JointGaussian source_covariance(const SourceSpec& spec) {
    spec.validate();
    const int t = spec.horizon;
    Eigen::MatrixXd cov(t, t);
    std::vector<std::string> labels;
    for (int i = 1; i <= t; ++i) {
        labels.push_back(source_label(i));
        for (int k = 1; k <= t; ++k) cov(i - 1, k - 1) = spec.source_cov(i, k);
    }
    return JointGaussian(spec, std::move(labels), std::move(cov), {});
}

// Appends Xhat_j. Z_j is independent of everything already in the joint, and
// Xhat_j depends on the past only through Xhat_{<j} and X_j.
inline JointGaussian extend_joint(const JointGaussian& joint, const FrameCoeffs& coeffs) {
    coeffs.validate();
    const int j = coeffs.frame_index;
    if (j != joint.reconstructed() + 1) {
        throw ShapeError("cannot append frame " + std::to_string(j) + " after " +
                         std::to_string(joint.reconstructed()) + " reconstructions");
    }
    if (j > joint.horizon()) throw ShapeError("frame index exceeds horizon");

    std::vector<int> inputs = joint.past_recon_indices(j);
    inputs.push_back(joint.source_index(j));
    const Eigen::VectorXd w = coeffs.stacked();

    const int n = joint.dim();
    const Eigen::MatrixXd& old = joint.cov();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n + 1, n + 1);
    cov.topLeftCorner(n, n) = old;
    Eigen::VectorXd cross = Eigen::VectorXd::Zero(n);
    for (std::size_t a = 0; a < inputs.size(); ++a) cross += w(static_cast<Eigen::Index>(a)) * old.col(inputs[a]);
    cov.block(n, 0, 1, n) = cross.transpose();
    cov.block(0, n, n, 1) = cross;
    double lin_var = 0.0;
    for (std::size_t a = 0; a < inputs.size(); ++a) lin_var += w(static_cast<Eigen::Index>(a)) * cross(inputs[a]);
    cov(n, n) = lin_var + coeffs.noise_var;

    const double tr = cov.trace();
    const double min_ev = linalg::min_eigenvalue(cov);
    if (!(min_ev >= -1e-10 * tr)) {
        throw DegeneracyError("joint covariance not PSD after appending frame " + std::to_string(j) +
                              " (min eigenvalue " + std::to_string(min_ev) + ")");
    }

    std::vector<std::string> labels = joint.labels();
    labels.push_back(recon_label(j));
    std::vector<FrameCoeffs> recon = joint.recon();
    recon.push_back(coeffs);
    return JointGaussian(joint.spec(), std::move(labels), std::move(cov), std::move(recon));
}

inline JointGaussian build_joint(const SourceSpec& spec, const ReconPolicy& policy) {
    policy.validate();
    JointGaussian joint = source_covariance(spec);
    for (const auto& f : policy.frames) joint = extend_joint(joint, f);
    return joint;
}

// Var(target | given) by Schur complement; singular conditioning blocks use
// the eigendecomposition pseudo-inverse.
inline double conditional_variance(const JointGaussian& joint, int target, const std::vector<int>& given) {
    const Eigen::MatrixXd& c = joint.cov();
    const double var = c(target, target);
    if (given.empty()) return var;
    const Eigen::MatrixXd g = joint.block(given);
    Eigen::VectorXd cross(static_cast<Eigen::Index>(given.size()));
    for (std::size_t a = 0; a < given.size(); ++a) cross(static_cast<Eigen::Index>(a)) = c(target, given[a]);
    const double explained = cross.dot(linalg::pinv_symmetric(g) * cross);
    return std::max(0.0, var - explained);
}

inline double conditional_variance(const JointGaussian& joint, std::string_view target,
                                   const std::vector<std::string>& given) {
    std::vector<int> idx;
    idx.reserve(given.size());
    for (const auto& g : given) idx.push_back(joint.index_of(g));
    return conditional_variance(joint, joint.index_of(target), idx);
}

// I(X_j; Xhat_j | Xhat_{<j}) in bits; +infinity for a noiseless frame that
// still carries X_j.
inline double frame_rate(const JointGaussian& joint, int j) {
    const FrameCoeffs& fc = joint.coeffs(j);
    const double s = fc.source_coeff;
    const double a2 = fc.noise_var;
    if (s == 0.0) return 0.0;
    const double v = conditional_variance(joint, joint.source_index(j), joint.past_recon_indices(j));
    if (a2 == 0.0) return v > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return 0.5 * std::log2((s * s * v + a2) / a2);
}

// E[(X_j - Xhat_j)^2].
inline double frame_distortion(const JointGaussian& joint, int j) {
    const int x = joint.source_index(j);
    const int xh = joint.recon_index(j);
    const Eigen::MatrixXd& c = joint.cov();
    return std::max(0.0, c(x, x) + c(xh, xh) - 2.0 * c(x, xh));
}

}  // namespace rdp
