#include "rdp/cli.hpp"
#include "rdp/sweep_csv.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "rdp_cli");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = rdp::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path temp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "rdp_cli_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<double> distortions_from_table(const std::string& text) {
    std::vector<double> d;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string frame, rate;
        double dist = 0.0;
        ls >> frame >> rate >> dist;
        d.push_back(dist);
    }
    return d;
}

TEST(CsvRoundTrip, ParseThenEmitIsByteIdentical) {
    rdp::SweepRow r;
    r.plf = "sa";
    r.frame = 3;
    r.R1 = rdp::Rate::infinite();
    r.R2 = rdp::Rate(1e-4);
    r.R3 = rdp::Rate(0.123456789123);
    r.rho = 0.9;
    r.sigma2 = 2.0;
    r.distortion = 0.1234567891234;
    r.rate_used = 30.0;
    r.perception_residual = 1.5e-15;
    r.solver_status = "boundary-lagrange";
    rdp::SweepRow s = r;
    s.R3.reset();
    s.plf = "fmd";
    const std::string text = rdp::emit_csv({r, s});
    EXPECT_EQ(rdp::emit_csv(rdp::parse_csv(text)), text);
    const auto rows = rdp::parse_csv(text);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_TRUE(rows[0].R1->is_infinite());
    EXPECT_FALSE(rows[1].R3.has_value());
}

TEST(CsvRoundTrip, RejectsMalformedInput) {
    EXPECT_THROW(rdp::parse_csv("bad,header\n"), rdp::ParameterError);
    EXPECT_THROW(rdp::parse_csv(std::string(rdp::kSweepHeader) + "\nsa,1,2\n"), rdp::ParameterError);
    EXPECT_THROW(rdp::parse_number("1.5x"), rdp::ParameterError);
    EXPECT_THROW(rdp::parse_rate("-1"), rdp::ParameterError);
    EXPECT_TRUE(rdp::parse_rate("inf").is_infinite());
}

TEST(CliSolve, SaPrintsBothFrames) {
    const Result r = run({"solve", "--plf", "sa", "--rates", "0.1,1", "--rho", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto d = distortions_from_table(r.out);
    ASSERT_EQ(d.size(), 2u);
    EXPECT_NEAR(d[0], 2.0 * (1.0 - std::sqrt(1.0 - std::exp2(-0.2))), 1e-8);
    EXPECT_NEAR(d[1], 2.0 * (1.0 - std::sqrt(0.75)), 5.0 * std::sqrt(0.1));
}

TEST(CliSolve, InfiniteRatesAreLossless) {
    const Result r = run({"solve", "--plf", "jd", "--rates", "inf,inf,inf", "--rho", "0.5"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (double d : distortions_from_table(r.out)) EXPECT_NEAR(d, 0.0, 1e-6);
}

TEST(CliSolve, JdCopiesFirstFrame) {
    const Result r = run({"solve", "--plf", "jd", "--rates", "0.1,1", "--rho", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto d = distortions_from_table(r.out);
    EXPECT_NEAR(d[1], d[0], 1e-6);
}

TEST(CliSolve, WritesCsv) {
    const fs::path p = temp_path("solve.csv");
    const Result r = run({"solve", "--plf", "fmd", "--rates", "0.5,0.5,0.5", "--rho", "0.8", "--out", p.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = rdp::parse_csv(read_file(p));
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[2].frame, 3);
    EXPECT_EQ(rows[2].plf, "fmd");
}

TEST(CliExit, UsageErrors) {
    EXPECT_EQ(run({}).code, rdp::cli::kExitUsage);
    EXPECT_EQ(run({"solve", "--plf", "sa", "--rates", "0.1"}).code, rdp::cli::kExitUsage);
    EXPECT_EQ(run({"solve", "--plf", "kl", "--rates", "0.1", "--rho", "1"}).code, rdp::cli::kExitUsage);
    EXPECT_EQ(run({"solve", "--plf", "sa", "--rates", "0.1,x", "--rho", "1"}).code, rdp::cli::kExitUsage);
    EXPECT_EQ(run({"solve", "--plf", "sa", "--rates", "0.1", "--rho", "2"}).code, rdp::cli::kExitUsage);
    EXPECT_EQ(run({"solve", "--plf", "sa", "--rates", "0.1", "--rho", "abc"}).code, rdp::cli::kExitUsage);
    EXPECT_EQ(run({"bogus"}).code, rdp::cli::kExitUsage);
}

TEST(CliExit, HelpIsSuccess) {
    const Result r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("solve"), std::string::npos);
}

TEST(CliExit, UnwritablePathIsIoError) {
    EXPECT_EQ(run({"sweep", "--plf", "sa", "--rates", "0.1", "--rho", "1", "--sweep-range", "0.5,1", "--steps", "2",
                   "--out", "/nonexistent-dir/x.csv"})
                  .code,
              rdp::cli::kExitIo);
}

TEST(CliExit, NestedErrorsMapToInnermostCause) {
    std::string msg;
    try {
        try {
            throw rdp::InfeasibleError("variance match", "detail");
        } catch (const rdp::Error& e) {
            std::throw_with_nested(rdp::FrameError(2, e.what()));
        }
    } catch (const std::exception& e) {
        EXPECT_EQ(rdp::cli::detail::exit_code_for(e, msg), rdp::cli::kExitInfeasible);
    }
    try {
        try {
            throw rdp::NumericalError("no convergence", 0.5);
        } catch (const rdp::Error& e) {
            std::throw_with_nested(rdp::FrameError(3, e.what()));
        }
    } catch (const std::exception& e) {
        EXPECT_EQ(rdp::cli::detail::exit_code_for(e, msg), rdp::cli::kExitNumerical);
    }
}

TEST(CliSweep, SingleGridPointGivesOneRowPerLoss) {
    const Result r = run({"sweep", "--plf", "sa,jd,fmd", "--rates", "0.1", "--rho", "1", "--sweep-axis", "R2",
                          "--sweep-range", "1,1", "--steps", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = rdp::parse_csv(r.out);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].plf, "fmd");
    EXPECT_EQ(rows[1].plf, "jd");
    EXPECT_EQ(rows[2].plf, "sa");
}

TEST(CliSweep, SaBelowJdAlongSecondRate) {
    const Result r = run({"sweep", "--plf", "sa,jd", "--rates", "0.1", "--rho", "1", "--sweep-axis", "R2",
                          "--sweep-range", "0.1,2", "--steps", "8"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = rdp::parse_csv(r.out);
    ASSERT_EQ(rows.size(), 16u);
    for (int i = 0; i < 8; ++i) {
        EXPECT_EQ(rows[static_cast<std::size_t>(i)].plf, "jd");
        EXPECT_LT(rows[static_cast<std::size_t>(i + 8)].distortion, rows[static_cast<std::size_t>(i)].distortion);
    }
}

TEST(CliSweep, ThirdRateSaBelowJdAndApproachesFmd) {
    const Result r = run({"sweep", "--rates", "1,1", "--rho", "1", "--sweep-axis", "R3", "--sweep-range", "0.1,6",
                          "--steps", "6"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = rdp::parse_csv(r.out);
    ASSERT_EQ(rows.size(), 18u);
    for (int i = 0; i < 6; ++i) {
        const auto& fmd = rows[static_cast<std::size_t>(i)];
        const auto& jd = rows[static_cast<std::size_t>(i + 6)];
        const auto& sa = rows[static_cast<std::size_t>(i + 12)];
        EXPECT_EQ(sa.frame, 3);
        EXPECT_LE(sa.distortion, jd.distortion + 1e-9);
        if (i == 5) EXPECT_NEAR(sa.distortion, fmd.distortion, 1e-2);
    }
}

TEST(CliSweep, RequiresEarlierRates) {
    EXPECT_EQ(run({"sweep", "--rates", "0.1", "--rho", "1", "--sweep-axis", "R3", "--sweep-range", "0,1"}).code,
              rdp::cli::kExitUsage);
    EXPECT_EQ(run({"sweep", "--rates", "0.1", "--rho", "1", "--sweep-axis", "R9", "--sweep-range", "0,1"}).code,
              rdp::cli::kExitUsage);
    EXPECT_EQ(run({"sweep", "--rates", "0.1", "--rho", "1", "--sweep-range", "2,1"}).code, rdp::cli::kExitUsage);
}

// One golden sweep per loss; compared field by field with a numeric tolerance.
TEST(CliSweep, GoldenFiles) {
    for (const std::string plf : {"sa", "jd", "fmd"}) {
        const fs::path golden = fs::path(RDP_GOLDEN_DIR) / ("sweep_r2_" + plf + ".csv");
        const auto expected = rdp::parse_csv(read_file(golden));
        const Result r = run({"sweep", "--plf", plf, "--rates", "0.1", "--rho", "1", "--sweep-axis", "R2",
                              "--sweep-range", "0.05,2", "--steps", "5"});
        ASSERT_EQ(r.code, 0) << r.err;
        const auto got = rdp::parse_csv(r.out);
        ASSERT_EQ(got.size(), expected.size()) << plf;
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].plf, expected[i].plf);
            EXPECT_EQ(got[i].frame, expected[i].frame);
            EXPECT_EQ(rdp::format_rate(got[i].R2), rdp::format_rate(expected[i].R2));
            EXPECT_EQ(got[i].solver_status, expected[i].solver_status);
            EXPECT_NEAR(got[i].distortion, expected[i].distortion, 1e-7) << plf << " row " << i;
            EXPECT_NEAR(got[i].rate_used, expected[i].rate_used, 1e-7) << plf << " row " << i;
            EXPECT_NEAR(got[i].perception_residual, expected[i].perception_residual, 1e-9);
        }
    }
}

TEST(CliAsymptotics, LowRateTable) {
    const Result r = run({"asymptotics", "--rates", "1e-3,1", "--rho", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("regime=low_R1"), std::string::npos);
    int rows = 0;
    std::istringstream in(r.out);
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string plf, frame;
        double asym = 0.0, num = 0.0, gap = 0.0, c = 0.0;
        if (!(ls >> plf >> frame >> asym >> num >> gap >> c)) continue;
        ++rows;
        EXPECT_LE(gap, c * std::sqrt(1e-3) * 1.5 + 1e-12) << plf;
    }
    EXPECT_EQ(rows, 3);
}

TEST(CliAsymptotics, HighRateInfiniteThirdRate) {
    const Result r = run({"asymptotics", "--plf", "sa,jd", "--rates", "inf,1e-4,inf", "--rho", "0.9"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("high_R1_eps_inf"), std::string::npos);
    EXPECT_NE(r.out.find("jd   3      0.17656"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("sa   3      0.000000000"), std::string::npos) << r.out;
}

TEST(CliAsymptotics, ZeroEpsHasZeroGap) {
    const Result r = run({"asymptotics", "--plf", "sa", "--rates", "0,1", "--rho", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    ASSERT_TRUE(std::getline(in, line));
    std::istringstream ls(line);
    std::string plf, frame, c;
    double asym = 0.0, num = 0.0, gap = 1.0;
    ls >> plf >> frame >> asym >> num >> gap >> c;
    EXPECT_LE(gap, 1e-9) << r.out;
    EXPECT_EQ(c, "-");
}

TEST(CliAsymptotics, OutOfRegime) {
    const Result r = run({"asymptotics", "--rates", "0.5,1", "--rho", "1"});
    EXPECT_EQ(r.code, rdp::cli::kExitInfeasible);
    EXPECT_NE(r.err.find("neither small"), std::string::npos);
    EXPECT_EQ(run({"asymptotics", "--plf", "fmd", "--rates", "inf,1e-3", "--rho", "0.05"}).code,
              rdp::cli::kExitInfeasible);
}

TEST(CliSimulate, PassesAndIsSeedDeterministic) {
    const std::vector<std::string> args = {"simulate", "--plf", "sa", "--rates", "0.1,1", "--rho", "1",
                                           "--n",      "200000", "--seed", "7"};
    const Result a = run(args);
    const Result b = run(args);
    EXPECT_EQ(a.code, 0) << a.out;
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out.find("result: pass"), std::string::npos);
}

TEST(CliSimulate, LowPowerStillPasses) {
    const Result r = run({"simulate", "--plf", "sa", "--rates", "0.1,1", "--rho", "1", "--n", "10"});
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("low power"), std::string::npos);
}

TEST(CliSimulate, PerturbationFails) {
    const Result r = run({"simulate", "--plf", "sa", "--rates", "0.1,1", "--rho", "0.9", "--n", "100000", "--perturb",
                          "0.1"});
    EXPECT_EQ(r.code, rdp::cli::kExitValidation) << r.out;
    EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

}  // namespace
