#include "rdp/monte_carlo.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using rdp::PlfKind;

rdp::ReconPolicy perfect_policy(int t) {
    rdp::ReconPolicy p;
    for (int j = 1; j <= t; ++j) {
        rdp::FrameCoeffs fc;
        fc.frame_index = j;
        fc.past_coeffs.assign(static_cast<std::size_t>(j - 1), 0.0);
        fc.source_coeff = 1.0;
        p.frames.push_back(fc);
    }
    return p;
}

TEST(Simulate, PerfectPolicyHasZeroError) {
    const rdp::EmpiricalStats st = rdp::simulate({0.7, 1.0, 3}, perfect_policy(3), 5000, 1);
    for (double m : st.per_frame_mse) EXPECT_EQ(m, 0.0);
}

TEST(Simulate, UnitCorrelationRepeatsTheSource) {
    const rdp::EmpiricalStats st = rdp::simulate({1.0, 2.0, 3}, perfect_policy(3), 5000, 2);
    EXPECT_NEAR(st.emp_cov(0, 2), st.emp_cov(0, 0), 1e-12);
    EXPECT_NEAR(st.emp_cov(1, 1), st.emp_cov(2, 2), 1e-12);
}

TEST(Simulate, SeedDeterminism) {
    const rdp::HorizonSolution h = rdp::solve_horizon(PlfKind::SA, {0.1, 1.0}, {0.9, 1.0, 2});
    const rdp::EmpiricalStats a = rdp::simulate({0.9, 1.0, 2}, h.policy, 20000, 42);
    const rdp::EmpiricalStats b = rdp::simulate({0.9, 1.0, 2}, h.policy, 20000, 42);
    const rdp::EmpiricalStats c = rdp::simulate({0.9, 1.0, 2}, h.policy, 20000, 43);
    EXPECT_EQ(a.emp_cov, b.emp_cov);
    EXPECT_EQ(a.per_frame_mse, b.per_frame_mse);
    EXPECT_EQ(a.stderr_mse, b.stderr_mse);
    EXPECT_NE(a.per_frame_mse, c.per_frame_mse);
}

TEST(Simulate, DrawsDependOnlyOnTrajectoryIndex) {
    EXPECT_EQ(rdp::detail::counter_normal(9, 123, 2), rdp::detail::counter_normal(9, 123, 2));
    EXPECT_NE(rdp::detail::counter_normal(9, 123, 2), rdp::detail::counter_normal(9, 124, 2));
    for (int i = 0; i < 1000; ++i) {
        const double u = rdp::detail::counter_uniform(1, static_cast<std::uint64_t>(i), 0);
        EXPECT_GT(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Simulate, Errors) {
    EXPECT_THROW(rdp::simulate({0.5, 1.0, 3}, perfect_policy(2), 100, 1), rdp::ShapeError);
    EXPECT_THROW(rdp::simulate({0.5, 1.0, 2}, perfect_policy(2), 1, 1), rdp::ParameterError);
}

TEST(Simulate, StatsInvariants) {
    const rdp::HorizonSolution h = rdp::solve_horizon(PlfKind::JD, {0.5, 0.5, 0.5}, {0.8, 1.0, 3});
    const rdp::EmpiricalStats st = rdp::simulate({0.8, 1.0, 3}, h.policy, 10000, 5);
    EXPECT_EQ(st.emp_cov, st.emp_cov.transpose());
    for (double m : st.per_frame_mse) EXPECT_GE(m, 0.0);
    for (double s : st.stderr_mse) EXPECT_GT(s, 0.0);
}

TEST(Simulate, SourceCovarianceConverges) {
    const rdp::SourceSpec spec{0.8, 1.0, 3};
    const long n = 4000;
    const Eigen::MatrixXd exact = rdp::source_covariance(spec).cov();
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const rdp::EmpiricalStats st = rdp::simulate(spec, perfect_policy(3), n, seed);
        const double dev = (st.emp_cov.topLeftCorner(3, 3) - exact).cwiseAbs().maxCoeff();
        EXPECT_LE(dev, 5.0 / std::sqrt(static_cast<double>(n))) << "seed " << seed;
    }
}

TEST(Simulate, MseUnbiasedAcrossSeeds) {
    const rdp::SourceSpec spec{0.9, 1.0, 2};
    const rdp::HorizonSolution h = rdp::solve_horizon(PlfKind::SA, {0.1, 1.0}, spec);
    double acc1 = 0.0;
    double acc2 = 0.0;
    const int seeds = 100;
    for (int s = 0; s < seeds; ++s) {
        const rdp::EmpiricalStats st = rdp::simulate(spec, h.policy, 10000, static_cast<std::uint64_t>(s) + 1000);
        acc1 += st.per_frame_mse[0];
        acc2 += st.per_frame_mse[1];
    }
    EXPECT_NEAR(acc1 / seeds, h.frames[0].distortion, 0.01 * h.frames[0].distortion);
    EXPECT_NEAR(acc2 / seeds, h.frames[1].distortion, 0.01 * h.frames[1].distortion);
}

TEST(Validate, OwnPolicyPasses) {
    const rdp::SourceSpec spec{1.0, 1.0, 2};
    const rdp::HorizonSolution h = rdp::solve_horizon(PlfKind::SA, {0.1, 1.0}, spec);
    const rdp::EmpiricalStats st = rdp::simulate(spec, h.policy, 1000000, 7);
    const rdp::ValidationReport rep = rdp::validate_solution(st, h.joint, h.frames);
    EXPECT_TRUE(rep.passed());
    EXPECT_FALSE(rep.low_power);
    EXPECT_NEAR(st.per_frame_mse[1], h.frames[1].distortion, 4.0 * st.stderr_mse[1]);
    for (const auto& it : rep.items) {
        if (it.name.rfind("plf_residual", 0) == 0) EXPECT_LE(it.value, 0.01);
    }
}

TEST(Validate, PerturbedCoefficientIsFlagged) {
    const rdp::SourceSpec spec{0.9, 1.0, 2};
    const rdp::HorizonSolution h = rdp::solve_horizon(PlfKind::SA, {0.1, 1.0}, spec);
    rdp::ReconPolicy bad = h.policy;
    bad.frames[1].source_coeff += 0.1;
    const rdp::EmpiricalStats st = rdp::simulate(spec, bad, 200000, 3);
    const rdp::ValidationReport rep = rdp::validate_solution(st, h.joint, h.frames);
    EXPECT_FALSE(rep.passed());
    bool cov_flagged = false;
    for (const auto& it : rep.items) {
        if (it.name == "cov_max_dev") cov_flagged = !it.pass;
    }
    EXPECT_TRUE(cov_flagged);
}

TEST(Validate, LowPowerFlag) {
    const rdp::SourceSpec spec{0.9, 1.0, 2};
    const rdp::HorizonSolution h = rdp::solve_horizon(PlfKind::SA, {0.1, 1.0}, spec);
    const rdp::EmpiricalStats st = rdp::simulate(spec, h.policy, 10, 1);
    const rdp::ValidationReport rep = rdp::validate_solution(st, h.joint, h.frames);
    EXPECT_TRUE(rep.low_power);
    EXPECT_GT(rdp::covariance_tolerance(10, 1.0), 0.01);
    EXPECT_DOUBLE_EQ(rdp::covariance_tolerance(1000000, 2.0), 0.02);
}

TEST(Validate, ShapeMismatch) {
    const rdp::HorizonSolution h2 = rdp::solve_horizon(PlfKind::SA, {0.1, 1.0}, {0.9, 1.0, 2});
    const rdp::HorizonSolution h3 = rdp::solve_horizon(PlfKind::SA, {0.1, 1.0, 1.0}, {0.9, 1.0, 3});
    const rdp::EmpiricalStats st = rdp::simulate({0.9, 1.0, 2}, h2.policy, 1000, 1);
    EXPECT_THROW(rdp::validate_solution(st, h3.joint, h3.frames), rdp::ShapeError);
}

}  // namespace
