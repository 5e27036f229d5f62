#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <string>
#include <vector>

#include "pistlab/analysis.hpp"
#include "pistlab/dynamics.hpp"

namespace pistlab {

/// Shortest-exact decimal up to 17 significant digits; "nan", "inf", "-inf"
/// for non-finite values.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

/// Trajectory table: t,I1..Ik,z1..zm,phi1..phik,phiu1..phiuk with one row
/// per recorded step (phi wrapped, phiu cumulative).
inline std::string trajectory_csv(const Trajectory& traj, const ChartSpec& chart) {
    std::string out = "t";
    for (std::size_t i = 0; i < chart.k(); ++i) out += "," + ChartSpec::action_name(i);
    for (std::size_t a = 0; a < chart.m(); ++a) out += "," + ChartSpec::param_name(a);
    for (std::size_t i = 0; i < chart.k(); ++i) out += "," + ChartSpec::angle_name(i);
    for (std::size_t i = 0; i < chart.k(); ++i) out += ",phiu" + std::to_string(i + 1);
    out += '\n';
    for (std::size_t j = 0; j < traj.times.size(); ++j) {
        const State& s = traj.states[j];
        out += format_double(traj.times[j]);
        for (double v : s.I) out += "," + format_double(v);
        for (double v : s.z) out += "," + format_double(v);
        for (double v : s.phi) out += "," + format_double(v);
        for (double v : traj.unwrapped_phi[j]) out += "," + format_double(v);
        out += '\n';
    }
    return out;
}

/// Integer vector as "a;b;c" so it fits in one CSV cell.
inline std::string format_lattice_vector(const std::vector<int>& a) {
    std::string out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(a[i]);
    }
    return out;
}

/// Persistence table: I0_*,eps,action_drift,omega_hat_*,sieve_passed,worst_a,classification.
inline std::string persistence_csv(const std::vector<PersistenceReport>& reports, std::size_t k) {
    std::string out;
    for (std::size_t i = 0; i < k; ++i) out += "I0_" + std::to_string(i + 1) + ",";
    out += "eps,action_drift";
    for (std::size_t i = 0; i < k; ++i) out += ",omega_hat_" + std::to_string(i + 1);
    out += ",sieve_passed,worst_a,classification\n";
    for (const auto& r : reports) {
        for (double v : r.I0) out += format_double(v) + ",";
        out += format_double(r.eps) + "," + format_double(r.action_drift);
        for (double v : r.extracted_omega.omega) out += "," + format_double(v);
        out += r.sieve.passed ? ",true," : ",false,";
        out += format_lattice_vector(r.sieve.worst_a) + "," + to_string(r.classification) + "\n";
    }
    return out;
}

}  // namespace pistlab
