#pragma once

// Tradeoff-curve rows and their CSV form.

#include "rdp/error.hpp"
#include "rdp/source_model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace rdp {

inline constexpr std::string_view kSweepHeader =
    "plf,frame,R1,R2,R3,rho,sigma2,distortion,rate_used,perception_residual,solver_status";

struct SweepRow {
    std::string plf;
    int frame = 1;
    std::optional<Rate> R1, R2, R3;  // empty beyond the horizon
    double rho = 0.0;
    double sigma2 = 1.0;
    double distortion = 0.0;
    double rate_used = 0.0;
    double perception_residual = 0.0;
    std::string solver_status;
};

inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::string format_rate(const std::optional<Rate>& r) {
    if (!r) return "";
    return r->is_infinite() ? "inf" : format_number(r->bits());
}

inline double parse_number(std::string_view tok) {
    const std::string s(tok);
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ParameterError("malformed number '" + s + "'");
    return v;
}

inline Rate parse_rate(std::string_view tok) {
    const double v = parse_number(tok);
    if (!(v >= 0.0)) throw ParameterError("rate must be >= 0 or inf, got '" + std::string(tok) + "'");
    return std::isinf(v) ? Rate::infinite() : Rate(v);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string emit_csv_row(const SweepRow& r) {
    std::string out = r.plf;
    out += ',' + std::to_string(r.frame);
    out += ',' + format_rate(r.R1);
    out += ',' + format_rate(r.R2);
    out += ',' + format_rate(r.R3);
    out += ',' + format_number(r.rho);
    out += ',' + format_number(r.sigma2);
    out += ',' + format_number(r.distortion);
    out += ',' + format_number(r.rate_used);
    out += ',' + format_number(r.perception_residual);
    out += ',' + r.solver_status;
    return out;
}

inline std::string emit_csv(const std::vector<SweepRow>& rows) {
    std::string out(kSweepHeader);
    out += '\n';
    for (const SweepRow& r : rows) out += emit_csv_row(r) + '\n';
    return out;
}

inline std::vector<SweepRow> parse_csv(std::string_view text) {
    std::vector<SweepRow> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kSweepHeader) throw ParameterError("missing or unexpected CSV header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 11) throw ParameterError("CSV row has " + std::to_string(f.size()) + " fields, expected 11");
        SweepRow r;
        r.plf = f[0];
        r.frame = static_cast<int>(parse_number(f[1]));
        auto opt_rate = [](const std::string& tok) -> std::optional<Rate> {
            if (tok.empty()) return std::nullopt;
            return parse_rate(tok);
        };
        r.R1 = opt_rate(f[2]);
        r.R2 = opt_rate(f[3]);
        r.R3 = opt_rate(f[4]);
        r.rho = parse_number(f[5]);
        r.sigma2 = parse_number(f[6]);
        r.distortion = parse_number(f[7]);
        r.rate_used = parse_number(f[8]);
        r.perception_residual = parse_number(f[9]);
        r.solver_status = f[10];
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace rdp
