#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "pistlab/geometry.hpp"

using namespace pistlab;

namespace {

double at(const Expr& e, const ChartSpec& chart, const std::vector<double>& x) {
    return eval(e, binding_from_point(chart, x));
}

TEST(Chart, SymbolSetAndLayout) {
    const ChartSpec c(2, 3, {{0, 1}, {0, 1}}, {{0, 1}, {0, 1}, {0, 1}});
    EXPECT_EQ(c.dim(), 7u);
    EXPECT_EQ(c.symbols(), (std::vector<std::string>{"I1", "I2", "z1", "z2", "z3", "phi1", "phi2"}));
    EXPECT_EQ(c.symbol_index("z3"), 4u);
    EXPECT_FALSE(c.symbol_index("phi3"));
    EXPECT_THROW(ChartSpec(0, 0, {}, {}), SchemaError);
    EXPECT_THROW(ChartSpec(1, 0, {{1, 0}}, {}), SchemaError);
    EXPECT_THROW(ChartSpec(1, 1, {{0, 1}}, {}), SchemaError);
}

TEST(Bracket, Examples) {
    const ChartSpec c = ChartSpec::unit(1, 1);
    EXPECT_TRUE(poisson_bracket(parse("phi1", c), parse("I1", c), c).is_constant(1.0));
    EXPECT_TRUE(poisson_bracket(parse("z1", c), parse("I1^3*cos(phi1) + z1", c), c).is_constant(0.0));
    const Expr b = poisson_bracket(parse("I1", c), parse("z1*cos(phi1)", c), c);
    EXPECT_EQ(b, parse("z1*sin(phi1)", c));
}

TEST(VectorField, PoissonExamples) {
    const ChartSpec c10 = ChartSpec::unit(1, 0);
    auto vf = hamiltonian_vf_poisson(parse("I1^2/2", c10), c10);
    EXPECT_TRUE(vf.dI[0].is_constant(0.0));
    EXPECT_TRUE(vf.dz.empty());
    EXPECT_EQ(vf.dphi[0], Expr::variable("I1"));

    const ChartSpec c11 = ChartSpec::unit(1, 1);
    vf = hamiltonian_vf_poisson(parse("I1^2/2 + z1*cos(phi1)", c11), c11);
    EXPECT_EQ(vf.dI[0], parse("z1*sin(phi1)", c11));
    ASSERT_EQ(vf.dz.size(), 1u);
    EXPECT_TRUE(vf.dz[0].is_constant(0.0));
    EXPECT_EQ(vf.dphi[0], Expr::variable("I1"));

    const ChartSpec c20 = ChartSpec::unit(2, 0);
    vf = hamiltonian_vf_poisson(parse("I2", c20), c20);
    EXPECT_TRUE(vf.dI[0].is_constant(0.0));
    EXPECT_TRUE(vf.dI[1].is_constant(0.0));
    EXPECT_TRUE(vf.dphi[0].is_constant(0.0));
    EXPECT_TRUE(vf.dphi[1].is_constant(1.0));
}

SymplecticCoeffs coeffs_k1m2(const ChartSpec& c, const std::string& omega12, const std::string& c1,
                             const std::string& c2) {
    SymplecticCoeffs sc = SymplecticCoeffs::zero(c);
    sc.omega_AB[0][1] = parse(omega12, c);
    sc.omega_AB[1][0] = simplify_fold(-parse(omega12, c));
    sc.omega_iA[0][0] = parse(c1, c);
    sc.omega_iA[0][1] = parse(c2, c);
    return sc;
}

TEST(OmegaMatrix, CanonicalAndDarbouxBlocks) {
    const ChartSpec c10 = ChartSpec::unit(1, 0);
    const Eigen::MatrixXd M = assemble_omega_matrix(SymplecticCoeffs::zero(c10), c10, std::vector<double>{0.3, 1.0});
    Eigen::MatrixXd expected(2, 2);
    expected << 0, 1, -1, 0;
    EXPECT_EQ(M, expected);

    const ChartSpec c12 = ChartSpec::unit(1, 2);
    const auto sc = coeffs_k1m2(c12, "1/2", "0", "0");
    const Eigen::MatrixXd M4 = assemble_omega_matrix(sc, c12, std::vector<double>{0.1, 0.2, 0.3, 0.4});
    Eigen::MatrixXd e4(4, 4);  // (I1, z1, z2, phi1)
    e4 << 0, 0, 0, 1,
          0, 0, 1, 0,
          0, -1, 0, 0,
         -1, 0, 0, 0;
    EXPECT_EQ(M4, e4);

    EXPECT_THROW((void)assemble_omega_matrix(SymplecticCoeffs::zero(c12), c12, std::vector<double>{0.1, 0.2, 0.3, 0.4}),
                 SingularForm);
}

TEST(SymplecticField, CanonicalCaseMatchesUnperturbedEquation) {
    const ChartSpec c10 = ChartSpec::unit(1, 0);
    const auto xi = hamiltonian_vf_symplectic_at(parse("I1^2/2", c10), SymplecticCoeffs::zero(c10), c10,
                                                 std::vector<double>{0.7, 2.0});
    EXPECT_NEAR(xi(0), 0.0, 1e-15);
    EXPECT_NEAR(xi(1), 0.7, 1e-15);
}

// Hand elimination of M xi = grad H for H = I1^2/2 + z1 cos(phi1), k = 1, m = 2,
// Omega_12 = 1/2, Omega^1_A = (c1, c2), ordering (I1, z1, z2, phi1):
//   phi row: -xi_I = -z1 sin(phi)          -> xi_I  = z1 sin(phi)
//   z2 row : -c2 xi_I - xi_z1 = 0           -> xi_z1 = -c2 z1 sin(phi)
//   z1 row : -c1 xi_I + xi_z2 = cos(phi)    -> xi_z2 = cos(phi) + c1 z1 sin(phi)
//   I row  : c1 xi_z1 + c2 xi_z2 + xi_phi = I1
std::array<double, 4> hand_solution(double I1, double z1, double phi, double c1, double c2) {
    const double xi_I = z1 * std::sin(phi);
    const double xi_z1 = -c2 * z1 * std::sin(phi);
    const double xi_z2 = std::cos(phi) + c1 * z1 * std::sin(phi);
    return {xi_I, xi_z1, xi_z2, I1 - c1 * xi_z1 - c2 * xi_z2};
}

TEST(SymplecticField, ObstructionAgainstHandSolve) {
    const ChartSpec c = ChartSpec::unit(1, 2);
    const Expr H = parse("I1^2/2 + z1*cos(phi1)", c);
    const double half_pi = std::numbers::pi / 2;
    struct Case {
        double c1, c2, phi;
    };
    for (const Case& k : {Case{0, 0, 0}, Case{0, 0, half_pi}, Case{0.5, 0, half_pi}, Case{0.3, -0.7, 1.1}}) {
        std::ostringstream c1, c2;
        c1.precision(17);
        c2.precision(17);
        c1 << k.c1;
        c2 << k.c2;
        const auto sc = coeffs_k1m2(c, "1/2", c1.str(), c2.str());
        const std::vector<double> x{0.8, 1.0, 0.4, k.phi};
        const auto xi = hamiltonian_vf_symplectic_at(H, sc, c, x);
        const auto expected = hand_solution(0.8, 1.0, k.phi, k.c1, k.c2);
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(xi(j), expected[static_cast<std::size_t>(j)], 1e-14);
    }
    // the Poisson field never moves z
    for (const auto& dz : hamiltonian_vf_poisson(H, c).dz) EXPECT_TRUE(dz.is_constant(0.0));
}

TEST(SymplecticField, ActionOnlyHamiltonianKeepsZFixed) {
    const ChartSpec c(2, 2, {{0.5, 2}, {0.5, 2}}, {{-1, 1}, {-1, 1}});
    const Expr H = parse("I1^2/2 + I1*I2 + I2^3", c);
    Rng rng(5);
    for (int s = 0; s < 100; ++s) {
        SymplecticCoeffs sc = SymplecticCoeffs::zero(c);
        const double w = rng.uniform(0.2, 2.0);
        sc.omega_AB[0][1] = Expr::constant(w);
        sc.omega_AB[1][0] = Expr::constant(-w);
        for (auto& row : sc.omega_iA)
            for (auto& e : row) e = Expr::constant(rng.uniform(-1, 1));
        const auto x = c.sample_point(rng);
        const auto xi = hamiltonian_vf_symplectic_at(H, sc, c, x);
        EXPECT_NEAR(xi(2), 0.0, 1e-12);
        EXPECT_NEAR(xi(3), 0.0, 1e-12);
    }
    // a z-dependent H moves z even without angles
    SymplecticCoeffs sc = SymplecticCoeffs::zero(c);
    sc.omega_AB[0][1] = Expr::constant(0.5);
    sc.omega_AB[1][0] = Expr::constant(-0.5);
    const auto xi = hamiltonian_vf_symplectic_at(parse("I1^2/2 + z1*I2", c), sc, c, std::vector<double>{1, 1, 0, 0, 0, 0});
    EXPECT_NEAR(xi(3), 1.0, 1e-14);
}

TEST(Involution, Examples) {
    const ChartSpec c20(2, 0, {{0, 1}, {0, 1}}, {});
    auto r = involution_check({parse("I1", c20), parse("I2", c20)}, c20, 100, 1);
    EXPECT_TRUE(r.passed);
    EXPECT_EQ(r.max_abs, 0.0);
    r = involution_check({parse("I1", c20), parse("I1^2/2 + I2", c20)}, c20, 100, 1);
    EXPECT_TRUE(r.passed);
    r = involution_check({parse("I1", c20), parse("cos(phi1)", c20)}, c20, 100, 1);
    EXPECT_FALSE(r.passed);
    EXPECT_GT(r.max_abs, 0.9);
    EXPECT_LE(r.max_abs, 1.0);
}

TEST(Jacobi, HoldsForTheBivectorAndFailsForAMutatedSign) {
    const ChartSpec c(2, 1, {{-1, 1}, {-1, 1}}, {{-1, 1}});
    EXPECT_TRUE(jacobi_check(c, 200, 3).passed);

    // explicit triple from the examples
    const Expr f = parse("sin(phi1)", c), g = parse("I1^2", c), h = parse("z1", c);
    const Expr jac = poisson_bracket(f, poisson_bracket(g, h, c), c) + poisson_bracket(g, poisson_bracket(h, f, c), c) +
                     poisson_bracket(h, poisson_bracket(f, g, c), c);
    EXPECT_TRUE(simplify_fold(jac).is_constant(0.0));

    // minus sign of the second term flipped
    const BracketFn mutated = [](const Expr& a, const Expr& b, const ChartSpec& ch) {
        Expr sum = Expr::constant(0.0);
        for (std::size_t i = 0; i < ch.k(); ++i) {
            const auto I = ChartSpec::action_name(i), phi = ChartSpec::angle_name(i);
            sum = sum + diff(a, phi) * diff(b, I) + diff(a, I) * diff(b, phi);
        }
        return simplify_fold(sum);
    };
    const auto bad = jacobi_check(c, 200, 3, mutated);
    EXPECT_FALSE(bad.passed);
    EXPECT_GT(bad.max_abs, 1e-3);
}

// --- properties -------------------------------------------------------------

TEST(Property, BracketAntisymmetryLeibnizCasimir) {
    const ChartSpec c(2, 2, {{-1, 1}, {-1, 1}}, {{-1, 1}, {-1, 1}});
    Rng rng(9);
    for (int s = 0; s < 200; ++s) {
        const Expr f = random_poly_trig(c, rng, 3);
        const Expr g = random_poly_trig(c, rng, 3);
        const Expr h = random_poly_trig(c, rng, 3);
        const auto x = c.sample_point(rng);
        EXPECT_NEAR(at(poisson_bracket(f, g, c), c, x), -at(poisson_bracket(g, f, c), c, x), 1e-12);
        const double lhs = at(poisson_bracket(f, g * h, c), c, x);
        const double rhs = at(poisson_bracket(f, g, c) * h + g * poisson_bracket(f, h, c), c, x);
        EXPECT_NEAR(lhs, rhs, 1e-10 * (1.0 + std::abs(lhs)));
        for (std::size_t a = 0; a < c.m(); ++a)
            EXPECT_TRUE(simplify_fold(poisson_bracket(Expr::variable(ChartSpec::param_name(a)), g, c)).is_constant(0.0));
    }
}

TEST(Property, PoissonFieldEqualsBracketsWithCoordinates) {
    const ChartSpec c(2, 1, {{-1, 1}, {-1, 1}}, {{-1, 1}});
    Rng rng(10);
    for (int s = 0; s < 100; ++s) {
        const Expr Hp = random_poly_trig(c, rng, 3);
        const auto vf = hamiltonian_vf_poisson(Hp, c).flat();
        const auto x = c.sample_point(rng);
        for (std::size_t j = 0; j < c.dim(); ++j) {
            const Expr coord = Expr::variable(c.symbol_name(j));
            EXPECT_NEAR(at(vf[j], c, x), at(poisson_bracket(coord, Hp, c), c, x), 1e-12);
        }
    }
}

TEST(Property, SymplecticAndPoissonAgreeOnActionAngleBlock) {
    const ChartSpec c(2, 2, {{-1, 1}, {-1, 1}}, {{-1, 1}, {-1, 1}});
    Rng rng(12);
    for (int s = 0; s < 100; ++s) {
        // H independent of z; Omega^i_A = 0
        const Expr Hp = parse("I1^2/2 + I2*I1 + 0.3*cos(phi1 - 2*phi2)*I1 + sin(phi2)", c);
        SymplecticCoeffs sc = SymplecticCoeffs::zero(c);
        const double w = rng.uniform(0.1, 3.0);
        sc.omega_AB[0][1] = parse("1 + I1^2", c) * Expr::constant(w);
        sc.omega_AB[1][0] = -sc.omega_AB[0][1];
        const auto x = c.sample_point(rng);
        const auto xi = hamiltonian_vf_symplectic_at(Hp, sc, c, x);
        const auto vf = hamiltonian_vf_poisson(Hp, c).flat();
        for (std::size_t j : {0u, 1u, 4u, 5u}) EXPECT_NEAR(xi(static_cast<Eigen::Index>(j)), at(vf[j], c, x), 1e-10);
    }
}

TEST(SymplecticCoeffs, Validation) {
    const ChartSpec c = ChartSpec::unit(1, 2);
    EXPECT_NO_THROW(validate_symplectic_coeffs(coeffs_k1m2(c, "1/2", "z1", "I1"), c));
    SymplecticCoeffs bad = coeffs_k1m2(c, "1/2", "0", "0");
    bad.omega_AB[1][0] = Expr::constant(0.5);
    EXPECT_THROW(validate_symplectic_coeffs(bad, c), SchemaError);
    EXPECT_THROW(validate_symplectic_coeffs(SymplecticCoeffs::zero(c), c), SchemaError);
}

}  // namespace
