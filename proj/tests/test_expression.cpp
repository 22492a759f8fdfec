#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "stefan/error.hpp"
#include "stefan/expression.hpp"

using namespace stefan;

namespace {
struct Fixture {
    const char* src;
    double x, t, expect;
};

const double pi = std::numbers::pi;

const Fixture fixtures[] = {
    {"1", 0, 0, 1},
    {"2^3^2", 0, 0, 512},
    {"-2^2", 0, 0, -4},
    {"(-2)^2", 0, 0, 4},
    {"2*3+4", 0, 0, 10},
    {"2*(3+4)", 0, 0, 14},
    {"8/4/2", 0, 0, 1},
    {"1-2-3", 0, 0, -4},
    {"x^2 + 2*t", 3, 0.5, 10},
    {"sin(pi/2)", 0, 0, 1},
    {"cos(x)*exp(t)", 0, 1, std::exp(1.0)},
    {"log(exp(2))", 0, 0, 2},
    {"sqrt(16)", 0, 0, 4},
    {"abs(-x)", 2.5, 0, 2.5},
    {"min(x, t)", 1, 2, 1},
    {"max(x, t)", 1, 2, 2},
    {"1e-3*1000", 0, 0, 1},
    {"2.5e+1", 0, 0, 25},
    {"--x", 4, 0, 4},
    {"x*t - t*x + pi", 1.7, 0.3, pi},
};
}  // namespace

TEST_CASE("expression fixtures") {
    for (const auto& f : fixtures) {
        CAPTURE(f.src);
        CHECK(expr::parse(f.src).eval(f.x, f.t) == doctest::Approx(f.expect).epsilon(1e-14));
    }
}

TEST_CASE("rendering round-trips") {
    for (const auto& f : fixtures) {
        CAPTURE(f.src);
        const expr::Expr e = expr::parse(f.src);
        const std::string once = e.to_string();
        const expr::Expr again = expr::parse(once);
        CHECK(again == e);
        CHECK(again.to_string() == once);
        CHECK(again.eval(f.x, f.t) == e.eval(f.x, f.t));
    }
}

TEST_CASE("variable dependence") {
    CHECK(expr::parse("x + 1").depends_on_x());
    CHECK_FALSE(expr::parse("x + 1").depends_on_t());
    CHECK(expr::parse("sin(t)").depends_on_t());
    CHECK(expr::parse("2*pi").is_constant());
    CHECK(expr::Expr().eval(1, 1) == 0.0);
}

TEST_CASE("syntax errors carry offsets") {
    try {
        expr::parse("1 + * 2");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.offset() == 4);
        CHECK_FALSE(e.expected().empty());
    }
    CHECK_THROWS_AS(expr::parse("foo(x)"), SyntaxError);
    CHECK_THROWS_AS(expr::parse("(1 + 2"), SyntaxError);
    CHECK_THROWS_AS(expr::parse("min(1)"), SyntaxError);
    CHECK_THROWS_AS(expr::parse(""), SyntaxError);
    CHECK_THROWS_AS(expr::parse("1 2"), SyntaxError);
}

TEST_CASE("strict math raises domain errors") {
    const expr::Expr e = expr::parse("1/x");
    CHECK_THROWS_AS(e.eval(0.0, 0.0), DomainError);
    CHECK_THROWS_AS(expr::parse("log(x)").eval(-1.0, 0.0), DomainError);
    CHECK_THROWS_AS(expr::parse("sqrt(x)").eval(-1.0, 0.0), DomainError);
    expr::EvalOptions lax;
    lax.strict_math = false;
    CHECK(std::isinf(e.eval(0.0, 0.0, lax)));
}
