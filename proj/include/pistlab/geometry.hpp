#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pistlab/chart.hpp"
#include "pistlab/expr.hpp"

namespace pistlab {

/// Coefficient functions of the symplectic form
///   dI_i ^ dphi^i + omega_AB dz^A ^ dz^B + omega_iA dI_i ^ dz^A
/// on the chart. `omega_AB` is m x m, `omega_iA` is k x m; entries are
/// expressions over (I, z).
struct SymplecticCoeffs {
    std::vector<std::vector<Expr>> omega_AB;
    std::vector<std::vector<Expr>> omega_iA;

    /// All-zero coefficients of the right shape.
    static SymplecticCoeffs zero(const ChartSpec& chart) {
        return {std::vector<std::vector<Expr>>(chart.m(), std::vector<Expr>(chart.m())),
                std::vector<std::vector<Expr>>(chart.k(), std::vector<Expr>(chart.m()))};
    }
};

/// Vector field on the chart, one expression per coordinate.
struct VectorFieldSpec {
    std::vector<Expr> dI;
    std::vector<Expr> dz;
    std::vector<Expr> dphi;

    /// Components in chart order (I, z, phi).
    std::vector<Expr> flat() const {
        std::vector<Expr> out(dI);
        out.insert(out.end(), dz.begin(), dz.end());
        out.insert(out.end(), dphi.begin(), dphi.end());
        return out;
    }
};

/// Bracket of the rank-2k bivector pairing each action with its angle:
///
///   {f, g} = sum_i (df/dphi_i * dg/dI_i - df/dI_i * dg/dphi_i)
///
/// With this sign {I_i, H} = -dH/dphi_i and {phi_i, H} = dH/dI_i, and every
/// z coordinate is a Casimir.
inline Expr poisson_bracket(const Expr& f, const Expr& g, const ChartSpec& chart) {
    Expr sum = Expr::constant(0.0);
    for (std::size_t i = 0; i < chart.k(); ++i) {
        const std::string I = ChartSpec::action_name(i);
        const std::string phi = ChartSpec::angle_name(i);
        const Expr term = detail::make_sub(detail::make_mul(diff(f, phi), diff(g, I)),
                                           detail::make_mul(diff(f, I), diff(g, phi)));
        sum = detail::make_add(sum, term);
    }
    return sum;
}

/// Hamiltonian vector field of `Hp` with respect to the Poisson bivector:
/// dI_i = -dHp/dphi_i, dz_A = 0, dphi_i = dHp/dI_i.
inline VectorFieldSpec hamiltonian_vf_poisson(const Expr& Hp, const ChartSpec& chart) {
    VectorFieldSpec vf;
    for (std::size_t i = 0; i < chart.k(); ++i) {
        vf.dI.push_back(detail::make_neg(diff(Hp, ChartSpec::angle_name(i))));
        vf.dphi.push_back(diff(Hp, ChartSpec::action_name(i)));
    }
    vf.dz.assign(chart.m(), Expr::constant(0.0));
    return vf;
}

/// Determinant threshold below which the assembled form counts as degenerate.
inline constexpr double singular_det_tol = 1e-12;

/// Matrix of the symplectic form at `point` (flat chart order), with
/// M[I_i][phi_i] = 1, M[z_A][z_B] = 2 omega_AB (the z-sum runs over all
/// ordered pairs), M[I_i][z_A] = omega_iA, and antisymmetric completion.
/// Throws SingularForm when |det M| < 1e-12.
inline Eigen::MatrixXd assemble_omega_matrix(const SymplecticCoeffs& sc, const ChartSpec& chart,
                                             std::span<const double> point) {
    const auto k = chart.k();
    const auto m = chart.m();
    const auto n = chart.dim();
    const VarBinding b = binding_from_point(chart, point);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    auto set = [&M](std::size_t r, std::size_t c, double v) {
        M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        M(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = -v;
    };
    for (std::size_t i = 0; i < k; ++i) set(chart.action_index(i), chart.angle_index(i), 1.0);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t c = a + 1; c < m; ++c)
            set(chart.param_index(a), chart.param_index(c), 2.0 * eval(sc.omega_AB[a][c], b));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t a = 0; a < m; ++a)
            set(chart.action_index(i), chart.param_index(a), eval(sc.omega_iA[i][a], b));
    const double det = M.determinant();
    if (!(std::abs(det) >= singular_det_tol)) throw SingularForm(det);
    return M;
}

/// Gradient of `f` at `point`, in chart order.
inline Eigen::VectorXd gradient_at(const Expr& f, const ChartSpec& chart, std::span<const double> point) {
    const VarBinding b = binding_from_point(chart, point);
    Eigen::VectorXd g(static_cast<Eigen::Index>(chart.dim()));
    for (std::size_t j = 0; j < chart.dim(); ++j) g(static_cast<Eigen::Index>(j)) = eval(diff(f, chart.symbol_name(j)), b);
    return g;
}

/// Hamiltonian vector field of `Hp` with respect to the full symplectic
/// form at one point: the solution xi of M xi = grad Hp (chart order).
inline Eigen::VectorXd hamiltonian_vf_symplectic_at(const Expr& Hp, const SymplecticCoeffs& sc,
                                                    const ChartSpec& chart, std::span<const double> point) {
    const Eigen::MatrixXd M = assemble_omega_matrix(sc, chart, point);
    return M.fullPivLu().solve(gradient_at(Hp, chart, point));
}

// ---------------------------------------------------------------------------
// Sampled structure checks

struct PairResidual {
    std::size_t i = 0;
    std::size_t j = 0;
    double max_abs = 0.0;
};

struct InvolutionReport {
    std::vector<PairResidual> pairs;
    double max_abs = 0.0;
    bool passed = true;
    double tolerance = 1e-10;
};

/// Samples every pairwise bracket of `fs` at `n_samples` uniform points of
/// V x W x T^k. Passes iff every |{f_i, f_j}| <= 1e-10.
inline InvolutionReport involution_check(const std::vector<Expr>& fs, const ChartSpec& chart, int n_samples,
                                         std::uint64_t seed) {
    InvolutionReport report;
    std::vector<std::pair<std::size_t, std::size_t>> index;
    std::vector<CompiledExpr> brackets;
    for (std::size_t i = 0; i < fs.size(); ++i)
        for (std::size_t j = i + 1; j < fs.size(); ++j) {
            index.emplace_back(i, j);
            brackets.emplace_back(poisson_bracket(fs[i], fs[j], chart), chart);
            report.pairs.push_back({i, j, 0.0});
        }
    Rng rng(seed, 0x1b01);
    for (int s = 0; s < n_samples; ++s) {
        const auto x = chart.sample_point(rng);
        for (std::size_t p = 0; p < brackets.size(); ++p) {
            const double v = std::abs(brackets[p](x));
            report.pairs[p].max_abs = std::max(report.pairs[p].max_abs, v);
        }
    }
    for (const auto& p : report.pairs) report.max_abs = std::max(report.max_abs, p.max_abs);
    report.passed = report.max_abs <= report.tolerance;
    return report;
}

struct JacobiReport {
    double max_abs = 0.0;
    int samples = 0;
    bool passed = true;
    double tolerance = 1e-8;
};

using BracketFn = std::function<Expr(const Expr&, const Expr&, const ChartSpec&)>;

/// Jacobiator {f,{g,h}} + {g,{h,f}} + {h,{f,g}} of `bracket` for random
/// polynomial-trigonometric triples, each evaluated at one random point.
/// Passes iff every magnitude is <= 1e-8. The bracket is a parameter so that
/// deliberately broken brackets can be fed through the same check.
inline JacobiReport jacobi_check(const ChartSpec& chart, int n_samples, std::uint64_t seed,
                                 const BracketFn& bracket = poisson_bracket) {
    JacobiReport report;
    report.samples = n_samples;
    Rng rng(seed, 0x1ac0);
    for (int s = 0; s < n_samples; ++s) {
        const Expr f = random_poly_trig(chart, rng, 2);
        const Expr g = random_poly_trig(chart, rng, 2);
        const Expr h = random_poly_trig(chart, rng, 2);
        const Expr jac = detail::make_add(
            detail::make_add(bracket(f, bracket(g, h, chart), chart), bracket(g, bracket(h, f, chart), chart)),
            bracket(h, bracket(f, g, chart), chart));
        const auto x = chart.sample_point(rng);
        report.max_abs = std::max(report.max_abs, std::abs(CompiledExpr(jac, chart)(x)));
    }
    report.passed = report.max_abs <= report.tolerance;
    return report;
}

/// Checks the sampled invariants of `sc`: antisymmetry of omega_AB within
/// 1e-12 and invertibility of the assembled form. Throws SchemaError.
inline void validate_symplectic_coeffs(const SymplecticCoeffs& sc, const ChartSpec& chart, int n_samples = 100,
                                       std::uint64_t seed = 0) {
    if (sc.omega_AB.size() != chart.m()) throw SchemaError("model.omega_AB", "expected m rows");
    for (const auto& row : sc.omega_AB)
        if (row.size() != chart.m()) throw SchemaError("model.omega_AB", "expected m columns");
    if (sc.omega_iA.size() != chart.k()) throw SchemaError("model.omega_iA", "expected k rows");
    for (const auto& row : sc.omega_iA)
        if (row.size() != chart.m()) throw SchemaError("model.omega_iA", "expected m columns");
    Rng rng(seed, 0x5c0e);
    for (int s = 0; s < n_samples; ++s) {
        const auto x = chart.sample_point(rng);
        const VarBinding b = binding_from_point(chart, x);
        for (std::size_t a = 0; a < chart.m(); ++a)
            for (std::size_t c = a; c < chart.m(); ++c)
                if (std::abs(eval(sc.omega_AB[a][c], b) + eval(sc.omega_AB[c][a], b)) > 1e-12)
                    throw SchemaError("model.omega_AB", "not antisymmetric");
        try {
            (void)assemble_omega_matrix(sc, chart, x);
        } catch (const SingularForm&) {
            throw SchemaError("model.omega_AB", "assembled form is degenerate at a sampled point");
        }
    }
}

}  // namespace pistlab
