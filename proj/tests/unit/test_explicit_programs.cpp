#include "rdp/asymptotics.hpp"
#include "rdp/explicit_programs.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace {

using rdp::PlfKind;
using rdp::RateProfile;

const double kInf = std::numeric_limits<double>::infinity();

void expect_consistent(const std::vector<rdp::ConstraintResidual>& res, double tol) {
    ASSERT_FALSE(res.empty());
    for (const auto& r : res) {
        if (r.is_inequality) {
            EXPECT_GE(r.value, -tol) << r.name;
        } else {
            EXPECT_NEAR(r.value, 0.0, tol) << r.name;
        }
    }
}

TEST(ExplicitPrograms, SaFrameTwoEqualityIsTheLinearIdentity) {
    const rdp::SourceSpec spec{0.7, 1.0, 2};
    rdp::ReconPolicy prefix;
    const double nu = 0.6;
    prefix.frames.push_back({1, {}, nu, 1.0 - nu * nu});
    const double w1 = 0.3;
    const double w2 = 0.4;
    const auto res = rdp::explicit_program_residual(PlfKind::SA, 2, {2, {w1}, w2, 0.2}, {0.5, 1.0}, prefix, spec);
    ASSERT_EQ(res[0].name, "perception");
    EXPECT_DOUBLE_EQ(res[0].value, w1 + nu * w2 * 0.7 - 0.7 * nu);
}

TEST(ExplicitPrograms, SolverOutputsSatisfyFramesTwoAndThree) {
    for (PlfKind k : rdp::kAllPlfKinds) {
        for (double rho : {0.0, 0.4, 0.9, 1.0}) {
            const RateProfile prof{0.3, 0.8, 0.6};
            const rdp::SourceSpec spec{rho, 1.0, 3};
            const rdp::HorizonSolution h = rdp::solve_horizon(k, prof, spec);
            for (int j = 2; j <= 3; ++j) {
                expect_consistent(rdp::explicit_program_residual(k, j, h.policy.frames[static_cast<std::size_t>(j - 1)],
                                                                 prof, h.policy, spec),
                                  1e-8);
            }
        }
    }
}

TEST(ExplicitPrograms, SolverOutputsSatisfyFrameFour) {
    for (PlfKind k : {PlfKind::SA, PlfKind::JD}) {
        for (double rho : {0.5, 0.9}) {
            const RateProfile prof{kInf, 1e-3, 0.5, 0.2};
            const rdp::SourceSpec spec{rho, 1.0, 4};
            const rdp::HorizonSolution h = rdp::solve_horizon(k, prof, spec);
            expect_consistent(rdp::explicit_program_residual(k, 4, h.policy.frames[3], prof, h.policy, spec), 1e-8);
        }
    }
}

TEST(ExplicitPrograms, JdFrameThreeClosedFormWithInfiniteThirdRate) {
    const double rho = 0.9;
    const double eps = 1e-6;
    const rdp::SourceSpec spec{rho, 1.0, 3};
    const auto frames = rdp::high_rate_frames(PlfKind::JD, rho, 0.0, rdp::R3Mode::Infinite);
    rdp::ReconPolicy prefix;
    prefix.frames.push_back({1, {}, 1.0, 0.0});
    prefix.frames.push_back(frames[0].coeffs);
    const auto& f3 = frames[1].coeffs;
    EXPECT_NEAR(f3.source_coeff, 1.0 / std::sqrt(1.0 + rho * rho), 1e-12);
    expect_consistent(rdp::explicit_program_residual(PlfKind::JD, 3, f3, {kInf, eps, kInf}, prefix, spec), 1e-6);
}

TEST(ExplicitPrograms, UnsupportedCombinations) {
    const rdp::SourceSpec spec{0.5, 1.0, 5};
    const RateProfile prof{kInf, 1.0, 1.0, 1.0, 1.0};
    const rdp::HorizonSolution h = rdp::solve_horizon(PlfKind::FMD, prof, spec);
    EXPECT_THROW(rdp::explicit_program_residual(PlfKind::FMD, 4, h.policy.frames[3], prof, h.policy, spec),
                 rdp::NotImplementedError);
    EXPECT_THROW(rdp::explicit_program_residual(PlfKind::SA, 5, h.policy.frames[4], prof, h.policy, spec),
                 rdp::NotImplementedError);
    EXPECT_THROW(rdp::explicit_program_residual(PlfKind::SA, 1, h.policy.frames[0], prof, h.policy, spec),
                 rdp::NotImplementedError);
}

TEST(ExplicitPrograms, FrameFourNeedsLosslessFirstFrame) {
    const rdp::SourceSpec spec{0.5, 1.0, 4};
    const RateProfile prof{0.5, 1.0, 1.0, 1.0};
    const rdp::HorizonSolution h = rdp::solve_horizon(PlfKind::SA, prof, spec);
    EXPECT_THROW(rdp::explicit_program_residual(PlfKind::SA, 4, h.policy.frames[3], prof, h.policy, spec),
                 rdp::ParameterError);
}

}  // namespace
