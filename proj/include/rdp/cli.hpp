#pragma once

// Command-line front end: solve, sweep, asymptotics, simulate.
//
// Exit codes: 0 success, 1 numerical failure, 2 infeasible or out of regime,
// 3 validation failure, 64 usage error, 74 I/O error.

#include "rdp/asymptotics.hpp"
#include "rdp/error.hpp"
#include "rdp/monte_carlo.hpp"
#include "rdp/perception_metrics.hpp"
#include "rdp/rdp_solver.hpp"
#include "rdp/source_model.hpp"
#include "rdp/sweep_csv.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace rdp::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitNumerical = 1,
    kExitInfeasible = 2,
    kExitValidation = 3,
    kExitUsage = 64,
    kExitIo = 74,
};

class IoError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

inline std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

inline std::vector<Rate> parse_rates(const std::string& list) {
    std::vector<Rate> out;
    for (const auto& tok : split(list, ',')) out.push_back(parse_rate(tok));
    if (out.empty()) throw ParameterError("--rates is empty");
    return out;
}

inline std::vector<PlfKind> parse_plf_list(const std::string& list) {
    std::vector<PlfKind> out;
    for (const auto& tok : split(list, ',')) out.push_back(parse_plf(tok));
    return out;
}

inline std::string rates_text(const std::vector<Rate>& rates) {
    std::string s;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (i) s += ',';
        s += rates[i].is_infinite() ? "inf" : format_number(rates[i].bits());
    }
    return s;
}

inline std::string coeff_text(const FrameCoeffs& fc) {
    std::string s;
    for (std::size_t i = 0; i < fc.past_coeffs.size(); ++i) {
        s += "c" + std::to_string(i + 1) + "=" + format_number(fc.past_coeffs[i]) + " ";
    }
    s += "s=" + format_number(fc.source_coeff) + " alpha2=" + format_number(fc.noise_var);
    return s;
}

inline SweepRow make_row(PlfKind kind, int frame, const std::vector<Rate>& rates, const SourceSpec& spec,
                         const FrameSolution& sol) {
    SweepRow r;
    r.plf = std::string(to_string(kind));
    r.frame = frame;
    if (rates.size() > 0) r.R1 = rates[0];
    if (rates.size() > 1) r.R2 = rates[1];
    if (rates.size() > 2) r.R3 = rates[2];
    r.rho = spec.rho;
    r.sigma2 = spec.sigma2;
    r.distortion = sol.distortion;
    r.rate_used = sol.rate_used;
    r.perception_residual = sol.perception_residual;
    r.solver_status = std::string(to_string(sol.status));
    return r;
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << text;
    f.flush();
    if (!f) throw IoError("write to '" + path + "' failed");
}

// Innermost exception of a nested chain.
inline int exit_code_for(const std::exception& e, std::string& message) {
    try {
        std::rethrow_if_nested(e);
    } catch (const std::exception& inner) {
        return exit_code_for(inner, message);
    }
    message = e.what();
    if (dynamic_cast<const IoError*>(&e)) return kExitIo;
    if (dynamic_cast<const InfeasibleError*>(&e)) return kExitInfeasible;
    if (dynamic_cast<const RegimeError*>(&e)) return kExitInfeasible;
    if (dynamic_cast<const NotImplementedError*>(&e)) return kExitInfeasible;
    if (dynamic_cast<const ParameterError*>(&e)) return kExitUsage;
    if (dynamic_cast<const ShapeError*>(&e)) return kExitUsage;
    return kExitNumerical;
}

struct Common {
    std::string plf = "sa";
    std::string rates;
    double rho = 0.0;
    double sigma2 = 1.0;
    double grid_step = 0.005;
    std::string out;
};

inline void add_common(CLI::App* sub, Common& c, bool plf_required) {
    auto* p = sub->add_option("--plf", c.plf, "Perception loss: fmd, jd, sa (comma list where allowed)");
    if (plf_required) p->required();
    sub->add_option("--rates", c.rates, "Comma-separated rates in bits; 'inf' for infinite")->required();
    sub->add_option("--rho", c.rho, "Source correlation in [0, 1]")->required();
    sub->add_option("--sigma2", c.sigma2, "Per-frame source variance")->capture_default_str();
    sub->add_option("--grid-step", c.grid_step, "Grid step of the fallback search")->capture_default_str();
}

inline SourceSpec make_spec(const Common& c, int horizon) {
    SourceSpec spec{c.rho, c.sigma2, horizon};
    spec.validate();
    return spec;
}

inline SolverOptions make_opts(const Common& c) {
    if (!(c.grid_step > 0.0)) throw ParameterError("--grid-step must be positive");
    SolverOptions o;
    o.grid_step = c.grid_step;
    return o;
}

inline int cmd_solve(const Common& c, std::ostream& out) {
    const std::vector<Rate> rates = parse_rates(c.rates);
    const SourceSpec spec = make_spec(c, static_cast<int>(rates.size()));
    const PlfKind kind = parse_plf(c.plf);
    const HorizonSolution h = solve_horizon(kind, RateProfile(rates), spec, make_opts(c));

    out << "plf=" << to_string(kind) << " rho=" << format_number(spec.rho) << " sigma2=" << format_number(spec.sigma2)
        << " rates=" << rates_text(rates) << "\n";
    out << pad("frame", 7) << pad("rate", 10) << pad("distortion", 16) << pad("rate_used", 16) << pad("residual", 16)
        << pad("status", 19) << "coefficients\n";
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < h.frames.size(); ++i) {
        const FrameSolution& f = h.frames[i];
        const Rate r = rates[i];
        out << pad(std::to_string(i + 1), 7) << pad(r.is_infinite() ? "inf" : format_number(r.bits()), 10)
            << pad(fmt("%.9f", f.distortion), 16) << pad(fmt("%.9f", f.rate_used), 16)
            << pad(fmt("%.3e", f.perception_residual), 16) << pad(std::string(to_string(f.status)), 19)
            << coeff_text(f.coeffs) << "\n";
        rows.push_back(make_row(kind, static_cast<int>(i) + 1, rates, spec, f));
    }
    if (!c.out.empty()) write_file(c.out, emit_csv(rows));
    return kExitOk;
}

struct SweepArgs {
    std::string axis = "R2";
    std::string range;
    int steps = 20;
};

inline int parse_axis(const std::string& a) {
    std::string s = a;
    if (!s.empty() && (s[0] == 'R' || s[0] == 'r')) s = s.substr(1);
    if (s == "1") return 1;
    if (s == "2") return 2;
    if (s == "3") return 3;
    throw ParameterError("--sweep-axis must be R1, R2 or R3");
}

inline int cmd_sweep(const Common& c, const SweepArgs& sa, std::ostream& out) {
    const int axis = parse_axis(sa.axis);
    std::vector<Rate> fixed = parse_rates(c.rates);
    const int horizon = std::max(static_cast<int>(fixed.size()), axis);
    if (horizon > 3) throw ParameterError("sweep supports horizons up to 3 frames");
    if (static_cast<int>(fixed.size()) < axis - 1) throw ParameterError("--rates must fix every frame before the swept one");
    fixed.resize(static_cast<std::size_t>(horizon), Rate(0.0));

    const auto bounds = split(sa.range, ',');
    if (bounds.size() != 2) throw ParameterError("--sweep-range must be 'min,max'");
    const double lo = parse_number(bounds[0]);
    const double hi = parse_number(bounds[1]);
    if (!(lo >= 0.0) || !(hi >= lo) || std::isinf(hi)) throw ParameterError("--sweep-range needs 0 <= min <= max < inf");
    if (sa.steps < 1) throw ParameterError("--steps must be >= 1");

    const std::vector<PlfKind> kinds = parse_plf_list(c.plf);
    const SourceSpec spec = make_spec(c, horizon);
    const SolverOptions opts = make_opts(c);
    std::vector<std::pair<double, SweepRow>> keyed;
    for (PlfKind kind : kinds) {
        for (int i = 0; i < sa.steps; ++i) {
            const double r = sa.steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (sa.steps - 1);
            std::vector<Rate> rates = fixed;
            rates[static_cast<std::size_t>(axis - 1)] = Rate(r);
            const HorizonSolution h = solve_horizon(kind, RateProfile(rates), spec, opts);
            keyed.emplace_back(r, make_row(kind, axis, rates, spec, h.frames[static_cast<std::size_t>(axis - 1)]));
        }
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.second.plf != b.second.plf) return a.second.plf < b.second.plf;
        return a.first < b.first;
    });
    std::vector<SweepRow> rows;
    for (auto& kv : keyed) rows.push_back(std::move(kv.second));
    const std::string csv = emit_csv(rows);
    if (c.out.empty()) {
        out << csv;
    } else {
        write_file(c.out, csv);
    }
    return kExitOk;
}

inline int cmd_asymptotics(const Common& c, bool plf_given, std::ostream& out) {
    const std::vector<Rate> rates = parse_rates(c.rates);
    if (rates.size() < 2 || rates.size() > 3) throw ParameterError("asymptotics needs 2 or 3 rates");
    const std::vector<PlfKind> kinds =
        plf_given ? parse_plf_list(c.plf) : std::vector<PlfKind>{PlfKind::SA, PlfKind::JD, PlfKind::FMD};
    SourceSpec{c.rho, c.sigma2, 1}.validate();

    Regime regime;
    double eps;
    std::vector<int> frames;
    Rate low_r2(1.0);
    if (!rates[0].is_infinite()) {
        eps = rates[0].bits();
        if (eps > kMaxAsymptoticEps) {
            throw RegimeError("R1 = " + format_number(eps) + " is neither small (<= 0.05) nor inf");
        }
        if (rates.size() != 2) throw RegimeError("the low-R1 closed forms cover frame 2 only; pass two rates");
        regime = Regime::LowR1;
        low_r2 = rates[1];
        frames = {2};
    } else {
        if (rates[1].is_infinite()) throw RegimeError("high-R1 closed forms need R2 = eps");
        eps = rates[1].bits();
        regime = Regime::HighR1LowRest;
        frames = {2};
        if (rates.size() == 3) {
            if (rates[2].is_infinite()) {
                regime = Regime::HighR1EpsInf;
            } else if (std::abs(rates[2].bits() - eps) > 1e-12) {
                throw RegimeError("high-R1 closed forms need R3 = inf or R3 = R2");
            }
            frames = {2, 3};
        }
    }

    out << "regime=" << to_string(regime) << " eps=" << format_number(eps) << " rho=" << format_number(c.rho)
        << " sigma2=" << format_number(c.sigma2) << "\n";
    out << pad("plf", 5) << pad("frame", 7) << pad("asymptotic", 16) << pad("numeric", 16) << pad("gap", 14) << "C\n";
    const SolverOptions opts = make_opts(c);
    for (PlfKind kind : kinds) {
        const RateProfile prof(rates);
        const HorizonSolution h = solve_horizon(kind, prof, SourceSpec{c.rho, c.sigma2, prof.size()}, opts);
        for (int j : frames) {
            const double asym = asymptotic_distortion(kind, j, regime, eps, c.rho, c.sigma2, low_r2);
            const double num = h.frames[static_cast<std::size_t>(j - 1)].distortion;
            std::string cstr = "-";
            std::vector<double> eps_list;
            for (double e = eps; e >= 1e-6 && eps_list.size() < 3; e /= 10.0) eps_list.push_back(e);
            if (!eps_list.empty()) {
                const GapFit fit = asymptotic_gap(kind, j, regime, eps_list, c.rho, c.sigma2, low_r2, FmdBranch::Auto, opts);
                cstr = fmt("%.4g", fit.C);
            }
            out << pad(std::string(to_string(kind)), 5) << pad(std::to_string(j), 7) << pad(fmt("%.9f", asym), 16)
                << pad(fmt("%.9f", num), 16) << pad(fmt("%.3e", std::abs(num - asym)), 14) << cstr << "\n";
        }
    }
    return kExitOk;
}

struct SimArgs {
    long n = 1000000;
    std::uint64_t seed = 1;
    double perturb = 0.0;
};

inline int cmd_simulate(const Common& c, const SimArgs& sa, std::ostream& out) {
    const std::vector<Rate> rates = parse_rates(c.rates);
    const SourceSpec spec = make_spec(c, static_cast<int>(rates.size()));
    const PlfKind kind = parse_plf(c.plf);
    if (sa.n < 2) throw ParameterError("--n must be >= 2");
    const HorizonSolution h = solve_horizon(kind, RateProfile(rates), spec, make_opts(c));
    ReconPolicy sampled = h.policy;
    if (sa.perturb != 0.0) sampled.frames.back().source_coeff += sa.perturb;
    const EmpiricalStats st = simulate(spec, sampled, sa.n, sa.seed);
    const ValidationReport rep = validate_solution(st, h.joint, h.frames);

    out << "plf=" << to_string(kind) << " rho=" << format_number(spec.rho) << " sigma2=" << format_number(spec.sigma2)
        << " rates=" << rates_text(rates) << " n=" << sa.n << " seed=" << sa.seed;
    if (sa.perturb != 0.0) out << " perturb=" << format_number(sa.perturb);
    out << "\n";
    for (std::size_t i = 0; i < h.frames.size(); ++i) {
        out << "frame " << (i + 1) << ": analytic " << fmt("%.9f", h.frames[i].distortion) << " empirical "
            << fmt("%.9f", st.per_frame_mse[i]) << " stderr " << fmt("%.3e", st.stderr_mse[i]) << "\n";
    }
    for (const ValidationItem& it : rep.items) {
        out << pad(it.name, 24) << pad(fmt("%.6g", it.value), 16) << "threshold " << pad(fmt("%.6g", it.threshold), 12)
            << (it.pass ? "pass" : "FAIL") << "\n";
    }
    if (rep.low_power) out << "warning: low power (n=" << sa.n << " < " << kLowPowerN << ")\n";
    out << (rep.passed() ? "result: pass" : "result: FAIL") << "\n";
    return rep.passed() ? kExitOk : kExitValidation;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Rate-distortion-perception analysis for Gauss-Markov sources", "rdp_cli"};
    app.require_subcommand(1);

    detail::Common solve_c, sweep_c, asym_c, sim_c;
    detail::SweepArgs sweep_a;
    detail::SimArgs sim_a;

    auto* solve = app.add_subcommand("solve", "Solve every frame of one rate profile");
    detail::add_common(solve, solve_c, true);
    solve->add_option("--out", solve_c.out, "Also write the solutions as CSV");

    auto* sweep = app.add_subcommand("sweep", "Sweep one frame rate and write a CSV tradeoff curve");
    sweep_c.plf = "sa,jd,fmd";
    detail::add_common(sweep, sweep_c, false);
    sweep->add_option("--sweep-axis", sweep_a.axis, "Swept rate: R1, R2 or R3")->capture_default_str();
    sweep->add_option("--sweep-range", sweep_a.range, "min,max of the swept rate")->required();
    sweep->add_option("--steps", sweep_a.steps, "Number of grid points")->capture_default_str();
    sweep->add_option("--out", sweep_c.out, "CSV output path (stdout if omitted)");

    auto* asym = app.add_subcommand("asymptotics", "Compare closed forms with numeric solves");
    auto* asym_plf = asym->add_option("--plf", asym_c.plf, "Comma list of losses (default all)");
    asym->add_option("--rates", asym_c.rates, "eps,R2 (low R1) or inf,eps[,inf|eps] (high R1)")->required();
    asym->add_option("--rho", asym_c.rho, "Source correlation in [0, 1]")->required();
    asym->add_option("--sigma2", asym_c.sigma2, "Per-frame source variance")->capture_default_str();
    asym->add_option("--grid-step", asym_c.grid_step, "Grid step of the fallback search")->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "Solve, sample and validate by Monte Carlo");
    detail::add_common(sim, sim_c, true);
    sim->add_option("--n", sim_a.n, "Number of trajectories")->capture_default_str();
    sim->add_option("--seed", sim_a.seed, "Random seed")->capture_default_str();
    sim->add_option("--perturb", sim_a.perturb, "Offset added to the last frame's source coefficient")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*solve) return detail::cmd_solve(solve_c, out);
        if (*sweep) return detail::cmd_sweep(sweep_c, sweep_a, out);
        if (*asym) return detail::cmd_asymptotics(asym_c, asym_plf->count() > 0, out);
        if (*sim) return detail::cmd_simulate(sim_c, sim_a, out);
    } catch (const std::exception& e) {
        std::string msg;
        const int code = detail::exit_code_for(e, msg);
        err << "error: " << e.what();
        if (msg != e.what()) err << " (" << msg << ")";
        err << "\n";
        return code;
    }
    return kExitUsage;
}

}  // namespace rdp::cli
