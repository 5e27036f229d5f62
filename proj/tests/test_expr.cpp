#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "pistlab/expr.hpp"

using namespace pistlab;

namespace {

const ChartSpec chart11 = ChartSpec::unit(1, 1);
const ChartSpec chart22(2, 2, {{-2, 2}, {-2, 2}}, {{-1, 1}, {-1, 1}});

// Same value on random points of the chart.
void expect_same_function(const Expr& a, const Expr& b, const ChartSpec& chart, double tol = 0.0) {
    Rng rng(7);
    for (int s = 0; s < 50; ++s) {
        const auto x = chart.sample_point(rng);
        const VarBinding bind = binding_from_point(chart, x);
        EXPECT_NEAR(eval(a, bind), eval(b, bind), tol) << to_string(a) << " vs " << to_string(b);
    }
}

TEST(Parse, BuildsTheExpectedTrees) {
    const ChartSpec c10 = ChartSpec::unit(1, 0);
    const Expr e = parse("I1^2/2", c10);
    const Expr expected = Expr::binary(BinaryOp::div, pow(Expr::variable("I1"), 2), Expr::constant(2));
    EXPECT_EQ(e, expected);

    EXPECT_EQ(parse("z1*cos(phi1)", chart11), Expr::variable("z1") * cos(Expr::variable("phi1")));
}

TEST(Parse, RejectsUnknownIdentifiers) {
    const ChartSpec c10 = ChartSpec::unit(1, 0);
    try {
        (void)parse("I1 + q7", c10);
        FAIL() << "expected UnknownVariable";
    } catch (const UnknownVariable& e) {
        EXPECT_EQ(e.name(), "q7");
    }
    EXPECT_THROW((void)parse("z1", c10), UnknownVariable);     // m = 0
    EXPECT_THROW((void)parse("I2", c10), UnknownVariable);     // k = 1
    EXPECT_THROW((void)parse("I0", c10), UnknownVariable);
    EXPECT_THROW((void)parse("I01", c10), UnknownVariable);
    EXPECT_THROW((void)parse("log(I1)", c10), UnknownVariable);
}

TEST(Parse, ReportsSyntaxErrorPositions) {
    const ChartSpec c10 = ChartSpec::unit(1, 0);
    try {
        (void)parse("I1 + * 2", c10);
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.position(), 5u);
    }
    EXPECT_THROW((void)parse("sin I1", c10), SyntaxError);
    EXPECT_THROW((void)parse("(I1", c10), SyntaxError);
    EXPECT_THROW((void)parse("I1)", c10), SyntaxError);
    EXPECT_THROW((void)parse("I1^2.5", c10), SyntaxError);
    EXPECT_THROW((void)parse("I1^-1", c10), SyntaxError);
    EXPECT_THROW((void)parse("", c10), SyntaxError);
    EXPECT_THROW((void)parse("1e", c10), SyntaxError);
}

TEST(Parse, PrecedenceAndAssociativity) {
    const ChartSpec c10 = ChartSpec::unit(1, 0);
    const VarBinding b{{"I1", 3.0}, {"phi1", 0.5}};
    EXPECT_DOUBLE_EQ(eval(parse("-I1^2", c10), b), -9.0);
    EXPECT_DOUBLE_EQ(eval(parse("(-I1)^2", c10), b), 9.0);
    EXPECT_DOUBLE_EQ(eval(parse("8 - 3 - 2", c10), b), 3.0);
    EXPECT_DOUBLE_EQ(eval(parse("8 / 4 / 2", c10), b), 1.0);
    EXPECT_DOUBLE_EQ(eval(parse("2^3^2", c10), b), 512.0);
    EXPECT_DOUBLE_EQ(eval(parse("2 + 3*4^2", c10), b), 50.0);
    EXPECT_DOUBLE_EQ(eval(parse("-2*-I1", c10), b), 6.0);
    EXPECT_DOUBLE_EQ(eval(parse("1.5e-1 + .5", c10), b), 0.65);
}

TEST(Eval, Examples) {
    const ChartSpec c10 = ChartSpec::unit(1, 0);
    EXPECT_EQ(eval(parse("sin(phi1)", c10), {{"phi1", 0.0}}), 0.0);
    EXPECT_EQ(eval(parse("I1^2/2", c10), {{"I1", 3.0}}), 4.5);
    EXPECT_THROW((void)eval(parse("z1/ (I1-1)", chart11), {{"z1", 1.0}, {"I1", 1.0}}), DivisionByZero);
}

TEST(Eval, MissingBinding) {
    try {
        (void)eval(parse("z1*cos(phi1)", chart11), {{"z1", 1.0}});
        FAIL();
    } catch (const MissingBinding& e) {
        EXPECT_EQ(e.name(), "phi1");
    }
}

TEST(Diff, Examples) {
    const ChartSpec c10 = ChartSpec::unit(1, 0);
    EXPECT_EQ(diff(parse("I1^2/2", c10), "I1"), Expr::variable("I1"));
    EXPECT_TRUE(diff(parse("I1^2/2", c10), "phi1").is_constant(0.0));

    const Expr d = diff(parse("z1*cos(phi1)", chart11), "phi1");
    expect_same_function(d, parse("-z1*sin(phi1)", chart11), chart11);
    EXPECT_EQ(free_vars(d), (std::set<std::string>{"phi1", "z1"}));
}

TEST(Diff, QuotientAndChainRules) {
    const Expr e = parse("z1/(I1 + 2) + exp(I1*phi1)^2", chart11);
    const Expr dI = diff(e, "I1");
    const Expr expected = parse("-z1/(I1 + 2)^2 + 2*exp(I1*phi1)^2*phi1", chart11);
    expect_same_function(dI, expected, chart11, 1e-9);
    // denominators free of the variable keep the quotient simple
    EXPECT_EQ(diff(parse("phi1/(I1 + 2)", chart11), "phi1"), parse("1/(I1 + 2)", chart11));
}

TEST(Fold, Examples) {
    EXPECT_EQ(simplify_fold(parse("0*sin(phi1) + I1", chart11)), Expr::variable("I1"));
    EXPECT_TRUE(simplify_fold(parse("2*3", chart11)).is_constant(6.0));
    EXPECT_EQ(simplify_fold(parse("cos(phi1)*1", chart11)), cos(Expr::variable("phi1")));
    EXPECT_EQ(simplify_fold(parse("I1^1 - 0", chart11)), Expr::variable("I1"));
    EXPECT_TRUE(simplify_fold(parse("z1^0", chart11)).is_constant(1.0));
    EXPECT_THROW((void)simplify_fold(parse("I1/(2 - 2)", chart11)), DivisionByZero);
}

TEST(FreeVars, Examples) {
    const ChartSpec c = ChartSpec::unit(2, 1);
    EXPECT_EQ(free_vars(parse("I1^2/2", c)), (std::set<std::string>{"I1"}));
    EXPECT_EQ(free_vars(parse("z1*cos(phi1-phi2)", c)), (std::set<std::string>{"z1", "phi1", "phi2"}));
    EXPECT_TRUE(free_vars(parse("3.14", c)).empty());
    EXPECT_EQ(free_vars(parse("0*phi2 + I2", c)), (std::set<std::string>{"I2"}));
}

TEST(ZeroTest, FoldOrSampling) {
    EXPECT_TRUE(is_identically_zero(parse("0*I1", chart11), chart11));
    EXPECT_TRUE(is_identically_zero(parse("sin(phi1)^2 + cos(phi1)^2 - 1", chart11), chart11));
    EXPECT_FALSE(is_identically_zero(parse("sin(phi1)", chart11), chart11));
    EXPECT_TRUE(is_angle_independent(parse("I1^2 + z1 + 0*phi1", chart11), chart11));
    EXPECT_TRUE(is_angle_independent(parse("I1 + sin(phi1)^2 + cos(phi1)^2", chart11), chart11));
    EXPECT_FALSE(is_angle_independent(parse("I1 + cos(phi1)", chart11), chart11));
}

TEST(Compiled, MatchesTreeEvaluation) {
    Rng rng(11);
    for (int s = 0; s < 200; ++s) {
        const Expr e = random_poly_trig(chart22, rng, 4);
        const CompiledExpr c(e, chart22);
        const auto x = chart22.sample_point(rng);
        EXPECT_EQ(c(x), eval(e, binding_from_point(chart22, x)));
    }
    EXPECT_THROW((void)CompiledExpr(parse("1/(I1 - I1)", chart22), chart22)(std::vector<double>(6, 0.0)),
                 DivisionByZero);
}

// --- properties over random expressions ------------------------------------

TEST(Property, FoldPreservesValues) {
    Rng rng(1);
    for (int s = 0; s < 500; ++s) {
        const Expr e = random_poly_trig(chart22, rng, 4);
        const Expr f = simplify_fold(e);
        const auto x = chart22.sample_point(rng);
        const VarBinding b = binding_from_point(chart22, x);
        const double ve = eval(e, b);
        const double vf = eval(f, b);
        // identical up to reassociation of constant factors
        EXPECT_LE(std::abs(ve - vf), 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(ve)))
            << to_string(e) << " -> " << to_string(f);
    }
}

TEST(Property, DerivativeMatchesCenteredDifference) {
    Rng rng(2);
    const double step = 1e-6;
    for (int s = 0; s < 300; ++s) {
        const Expr e = random_poly_trig(chart22, rng, 3);
        const auto x = chart22.sample_point(rng);
        for (std::size_t v = 0; v < chart22.dim(); ++v) {
            const std::string var = chart22.symbol_name(v);
            auto xp = x;
            auto xm = x;
            xp[v] += step;
            xm[v] -= step;
            const double fd = (eval(e, binding_from_point(chart22, xp)) - eval(e, binding_from_point(chart22, xm))) /
                              (2.0 * step);
            const double d = eval(diff(e, var), binding_from_point(chart22, x));
            EXPECT_LE(std::abs(d - fd), 1e-5 * (1.0 + std::abs(fd))) << to_string(e) << " d/d" << var;
        }
    }
}

TEST(Property, PrintParseRoundTrip) {
    Rng rng(3);
    for (int s = 0; s < 500; ++s) {
        Expr e = random_poly_trig(chart22, rng, 4);
        if (s % 2) e = simplify_fold(e);  // folded trees carry negative constants
        const Expr back = parse(to_string(e), chart22);
        const auto x = chart22.sample_point(rng);
        const VarBinding b = binding_from_point(chart22, x);
        EXPECT_EQ(eval(back, b), eval(e, b)) << to_string(e);
    }
}

}  // namespace
