#include "doctest.h"

#include <cmath>

#include "random_exprs.hpp"
#include "thermoform/expr.hpp"

using namespace thermoform::expr;
using E = Expression;

TEST_CASE("parse builds the documented tree shapes") {
    ExprPtr p = parse("U/(3*V)");
    REQUIRE(p->kind() == Kind::Divide);
    CHECK(p->left()->kind() == Kind::Variable);
    CHECK(p->left()->variable_name() == "U");
    REQUIRE(p->right()->kind() == Kind::Multiply);
    CHECK(p->right()->left()->constant_value() == 3.0);
    CHECK(p->right()->right()->variable_name() == "V");

    ExprPtr mu = parse("U*V/N^2");
    REQUIRE(mu->kind() == Kind::Divide);
    REQUIRE(mu->left()->kind() == Kind::Multiply);
    REQUIRE(mu->right()->kind() == Kind::Power);
    CHECK(mu->right()->left()->variable_name() == "N");
    CHECK(mu->right()->right()->constant_value() == 2.0);
}

TEST_CASE("power is right-associative and binds above unary minus") {
    ExprPtr e = parse("2^3^2");  // 2^(3^2) = 512, folded at build time
    REQUIRE(e->kind() == Kind::Constant);
    CHECK(e->constant_value() == 512.0);

    ExprPtr n = parse("-x^2");
    REQUIRE(n->kind() == Kind::Negate);
    CHECK(n->left()->kind() == Kind::Power);

    ExprPtr inv = parse("x^-1");
    REQUIRE(inv->kind() == Kind::Power);
    CHECK(inv->right()->constant_value() == -1.0);
}

TEST_CASE("evaluation follows the bindings") {
    Binding at{{"U", 3.0}, {"V", 1.0}};
    CHECK(evaluate(parse("U/(3*V)"), at) == 1.0);
    at.set("U", 12.0);
    CHECK(evaluate(parse("U/(3*V)"), at) == 4.0);
    CHECK(evaluate(parse("exp(ln(U))"), at) == doctest::Approx(12.0).epsilon(1e-15));
}

TEST_CASE("evaluation domain errors") {
    Binding b{{"U", 0.0}, {"x", 1.0}};
    CHECK_THROWS_WITH_AS(evaluate(parse("ln(U)"), b), doctest::Contains("ln"), EvalError);
    CHECK_THROWS_WITH_AS(evaluate(parse("x/(x-1)"), b), doctest::Contains("division by zero"),
                         EvalError);
    CHECK_THROWS_WITH_AS(evaluate(parse("(-2)^0.5"), b), doctest::Contains("power"), EvalError);
    CHECK_THROWS_WITH_AS(evaluate(parse("V"), b), doctest::Contains("unbound variable 'V'"),
                         EvalError);
    Binding big{{"x", 1000.0}};
    CHECK_THROWS_WITH_AS(evaluate(parse("exp(x)"), big), doctest::Contains("non-finite"),
                         EvalError);
}

TEST_CASE("syntax errors carry byte offsets and expected tokens") {
    try {
        parse("ln(");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& err) {
        CHECK(err.offset() == 3);
        bool has_number = false;
        for (const auto& t : err.expected()) has_number |= (t == "number");
        CHECK(has_number);
    }

    try {
        parse("foo(2)");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& err) {
        CHECK(err.offset() == 0);
        CHECK(std::string(err.what()).find("unknown function 'foo'") != std::string::npos);
        REQUIRE(err.expected().size() == 2);
        CHECK(err.expected()[0] == "ln");
    }

    CHECK_THROWS_AS(parse(""), SyntaxError);
    try {
        parse("(1+2");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& err) {
        CHECK(err.offset() == 4);
        CHECK(err.expected()[0] == "')'");
    }
    try {
        parse("1 + * 2");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& err) {
        CHECK(err.offset() == 4);
    }
}

TEST_CASE("derivatives reduce to the expected closed forms") {
    // d(U*V/N^2)/dN = -2UV/N^3; at (1,1,2) that is -0.25
    ExprPtr d = differentiate(parse("U*V/N^2"), "N");
    Binding at{{"U", 1.0}, {"V", 1.0}, {"N", 2.0}};
    CHECK(evaluate(d, at) == doctest::Approx(-0.25).epsilon(1e-15));

    CHECK(structurally_equal(differentiate(parse("U*V"), "V"), parse("U")));
    CHECK(structurally_equal(differentiate(parse("ln(U)"), "U"), parse("1/U")));
    CHECK(structurally_equal(differentiate(parse("U^2"), "U"), parse("2*U")));
    CHECK(structurally_equal(differentiate(parse("exp(2*V)"), "V"), parse("exp(2*V)*2")));
    CHECK(structurally_equal(differentiate(parse("ln(V)"), "U"), E::constant(0.0)));
}

TEST_CASE("light simplification in the factories") {
    CHECK(parse("2^3")->kind() == Kind::Constant);
    CHECK(structurally_equal(parse("x^1"), parse("x")));
    CHECK(parse("x^0")->constant_value() == 1.0);
    CHECK(structurally_equal(parse("x*1"), parse("x")));
    CHECK(parse("0*x")->constant_value() == 0.0);
    CHECK(structurally_equal(parse("x+0"), parse("x")));
    CHECK(structurally_equal(E::negate(E::negate(E::variable("x"))), parse("x")));
    // ln of a negative constant must NOT fold; the error belongs to evaluation
    CHECK(parse("ln(0-2)")->kind() == Kind::Log);
}

TEST_CASE("substitution rebuilds through the factories") {
    ExprPtr e = substitute(parse("U/V"), "U", parse("u*N"));
    Binding at{{"u", 6.0}, {"N", 2.0}, {"V", 3.0}};
    CHECK(evaluate(e, at) == 4.0);
    CHECK(structurally_equal(substitute(parse("U/V"), "V", E::constant(1.0)), parse("U")));
}

TEST_CASE("printing uses minimal parentheses and survives re-parsing") {
    CHECK(to_string(parse("U/(3*V)")) == "U / (3 * V)");
    CHECK(to_string(parse("-(a*b)")) == "-(a * b)");
    CHECK(to_string(parse("(a^b)^c")) == "(a^b)^c");
    CHECK(to_string(parse("a^b^c")) == "a^b^c");
    CHECK(to_string(parse("a - (b - c)")) == "a - (b - c)");
    CHECK(to_string(parse("a*-b")) == "a * (-b)");
    CHECK(to_string(E::constant(0.1)) == "0.10000000000000001");

    for (const char* src : {"U/(3*V)", "U*V/N^2", "-(a*b)*c", "(a^b)^c", "a^b^c",
                            "a - (b - c)", "ln(x/y) + exp(-z)", "(-2)^x", "x^-0.5",
                            "1.5e-3*x + 2.25e6", "a/b/c", "a/(b/c)", "-x^2"}) {
        ExprPtr e = parse(src);
        CHECK_MESSAGE(structurally_equal(e, parse(to_string(e))), "round trip failed: ", src);
    }
}

TEST_CASE("free variables are sorted and deduplicated") {
    auto vars = free_variables(parse("U*V + ln(N) + U"));
    REQUIRE(vars.size() == 3);
    CHECK(vars[0] == "N");
    CHECK(vars[1] == "U");
    CHECK(vars[2] == "V");
    CHECK(free_variables(parse("1 + 2")).empty());
}

TEST_CASE("random trees: symbolic derivatives match finite differences") {
    auto cases = testgen::collect_fd_cases(testgen::kExprSeed, 100, 3);
    REQUIRE(cases.size() == 300);
    double worst = 0.0;
    for (const auto& c : cases) worst = std::max(worst, testgen::fd_mismatch(c));
    CHECK(worst <= 1e-6);
}

TEST_CASE("random trees: print/parse round trip is structural and numeric") {
    auto cases = testgen::collect_fd_cases(testgen::kExprSeed, 100, 3);
    REQUIRE(cases.size() == 300);
    for (const auto& c : cases) {
        ExprPtr back = parse(to_string(c.expr));
        REQUIRE(structurally_equal(c.expr, back));
        double a = evaluate(c.expr, testgen::bind(c.x));
        double b = evaluate(back, testgen::bind(c.x));
        CHECK(std::fabs(a - b) <= 1e-15 * std::max(1.0, std::fabs(a)));
    }
}
