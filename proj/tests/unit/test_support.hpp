#pragma once

#include "rdp/rdp_solver.hpp"

#include <gtest/gtest.h>

namespace rdp::test {

// Re-evaluates a solution through the covariance evaluators.
inline void expect_round_trip(const FrameSolution& sol, const JointGaussian& joint, int j, Rate rate) {
    const double bits = std::max(rate.finite_bits(), 1e-6);
    const double used = frame_rate(joint, j);
    const double residual = plf_residual(sol.kind, joint, j);
    EXPECT_LE(used, bits + 1e-6) << "frame " << j;
    EXPECT_LE(residual, 1e-6) << "frame " << j;
    EXPECT_GE(sol.distortion, -1e-12);
    EXPECT_LE(sol.distortion, 4.0 * joint.spec().sigma2 + 1e-12);
}

inline void expect_round_trip(const HorizonSolution& h, const RateProfile& profile) {
    for (int j = 1; j <= static_cast<int>(h.frames.size()); ++j) {
        expect_round_trip(h.frames[static_cast<std::size_t>(j - 1)], h.joint, j, profile.at(j));
    }
}

}  // namespace rdp::test
