#include <doctest.h>

#include <cmath>

#include "spinlab/errors.hpp"
#include "spinlab/expr.hpp"
#include "spinlab/gg.hpp"

using namespace spinlab;

TEST_SUITE("gg") {

TEST_CASE("expression parsing and evaluation") {
    const UltrametricMatrix q(3, {0.9, 0.3, 0.6, 0.3, 0.9, 0.3, 0.6, 0.3, 0.9});
    auto eval = [&](const std::string& s) { return Expression::parse(s).evaluate({&q, 2.0, 3.0, 5.0}); };
    CHECK(eval("R12") == 0.3);
    CHECK(eval("R(1,3)") == 0.6);
    CHECK(eval("R13 - R23 * 2") == doctest::Approx(0.0));
    CHECK(eval("-x^3 + y / 2") == doctest::Approx(-6.5));
    CHECK(eval("min(x, y) + max(y, z) + abs(-z)") == doctest::Approx(12.0));
    CHECK(eval("(x + y) * (z - 1)") == doctest::Approx(20.0));
    CHECK(eval("2^0") == 1.0);
    CHECK(eval("1e-1 * 10") == doctest::Approx(1.0));
    CHECK(Expression::parse("R12 * R(3,4)").max_replica() == 4);
    CHECK(Expression::parse("x*y").max_replica() == 0);
    CHECK(Expression::parse("x*y").uses_variables());
    CHECK(Expression::parse("1 + 2 * x").to_string() == "(1 + (2 * x))");
}

TEST_CASE("expression errors carry a position") {
    CHECK_THROWS_AS(Expression::parse(""), ConfigError);
    CHECK_THROWS_AS(Expression::parse("x +"), ConfigError);
    CHECK_THROWS_AS(Expression::parse("R11x"), ConfigError);
    CHECK_THROWS_AS(Expression::parse("foo(x)"), ConfigError);
    CHECK_THROWS_AS(Expression::parse("(x"), ConfigError);
    try {
        Expression::parse("x + * y");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("column") != std::string::npos);
    }
    const UltrametricMatrix q(2, {1.0, 0.5, 0.5, 1.0});
    CHECK_THROWS_AS(Expression::parse("R13").evaluate({&q, 0, 0, 0}), ConfigError);
}

TEST_CASE("exact integrals against zeta") {
    const ParisiMeasure meas({{0.2, 0.25}, {0.5, 0.25}, {0.9, 0.5}}, 0.0);
    const double mean = 0.25 * 0.2 + 0.25 * 0.5 + 0.5 * 0.9;
    const double second = 0.25 * 0.04 + 0.25 * 0.25 + 0.5 * 0.81;
    CHECK(integrate_pair(meas, Expression::parse("x * y")) == doctest::Approx(mean * mean));
    CHECK(integrate_diagonal(meas, Expression::parse("x * y")) == doctest::Approx(second));
    CHECK(integrate_pair(meas, Expression::parse("1")) == doctest::Approx(1.0));
}

TEST_CASE("mass test for the pair reduction") {
    const ParisiMeasure meas({{0.3, 0.5}, {0.7, 0.5}}, 0.0);
    GgFunctions fn;
    fn.pair = Expression::parse("1");
    GgOptions o;
    o.n_samples = 3000;
    const auto rep = gg_check(meas, fn, o);
    REQUIRE(rep.checks.size() == 1);
    const auto& c = rep.checks[0];
    CHECK(c.lhs.value == 1.0);
    CHECK(c.rhs_exact == doctest::Approx(1.0));
    CHECK(c.pass);
    CHECK(c.rhs_printed == doctest::Approx(1.5));
    CHECK_FALSE(c.printed_consistent);
}

TEST_CASE("identities hold on exactly sampled arrays") {
    const ParisiMeasure meas({{0.3, 0.5}, {0.7, 0.5}}, 0.0);
    GgFunctions fn;
    fn.f = Expression::parse("R12");
    fn.g = Expression::parse("x");
    fn.pair = Expression::parse("x * y + x");
    fn.triple = Expression::parse("(x - y)^2 + (x - z)^2 + (y - z)^2");
    GgOptions o;
    o.n_samples = 100000;
    o.seed = 17;
    const auto rep = gg_check(meas, fn, o);
    REQUIRE(rep.checks.size() == 3);
    for (const auto& c : rep.checks) {
        CAPTURE(c.name);
        CHECK(c.applicable);
        CHECK(c.pass);
    }
    CHECK(rep.pass());
    // GGI with f = R12, g = x: E R12 R13 = (E R12)^2 / 2 + E R12^2 / 2.
    const double m1 = 0.5, m2 = 0.5 * (0.09 + 0.49);
    CHECK(std::abs(rep.checks[0].lhs.value - (0.5 * m1 * m1 + 0.5 * m2)) <= 3 * rep.checks[0].lhs.std_error);
}

TEST_CASE("four-replica identity and a multi-level measure") {
    const ParisiMeasure meas({{0.1, 0.3}, {0.4, 0.3}, {0.75, 0.4}}, 0.0);
    GgFunctions fn;
    fn.f = Expression::parse("R12 * R23");
    fn.g = Expression::parse("x^2");
    GgOptions o;
    o.n_samples = 60000;
    o.seed = 3;
    const auto rep = gg_check(meas, fn, o);
    REQUIRE(rep.checks.size() == 1);
    CHECK(rep.checks[0].pass);
}

TEST_CASE("triple reduction needs a vanishing diagonal") {
    const ParisiMeasure meas({{0.3, 0.5}, {0.7, 0.5}}, 0.0);
    GgFunctions fn;
    fn.triple = Expression::parse("x + y");
    GgOptions o;
    o.n_samples = 3000;
    const auto rep = gg_check(meas, fn, o);
    CHECK_FALSE(rep.checks[0].applicable);
    CHECK(rep.pass());
}

TEST_CASE("cascade route runs and reports truncation") {
    const ParisiMeasure meas({{0.3, 0.5}, {0.7, 0.5}}, 0.0);
    GgFunctions fn;
    fn.f = Expression::parse("R12");
    fn.g = Expression::parse("x");
    GgOptions o;
    o.sampler = OverlapSampler::cascade;
    o.n_samples = 6000;
    o.truncation = 100;
    o.arrays_per_cascade = 20;
    const auto rep = gg_check(meas, fn, o);
    CHECK(rep.n_samples == 6000);
    CHECK(rep.max_tail_mass > 0.0);
    CHECK(rep.max_tail_mass < 0.2);
}

TEST_CASE("invalid function sets") {
    const ParisiMeasure meas({{0.5, 1.0}}, 0.0);
    GgOptions o;
    GgFunctions only_f;
    only_f.f = Expression::parse("R12");
    CHECK_THROWS_AS(gg_check(meas, only_f, o), ConfigError);
    GgFunctions bad_pair;
    bad_pair.pair = Expression::parse("R12");
    CHECK_THROWS_AS(gg_check(meas, bad_pair, o), ConfigError);
    GgFunctions bad_g;
    bad_g.f = Expression::parse("R12");
    bad_g.g = Expression::parse("R13");
    CHECK_THROWS_AS(gg_check(meas, bad_g, o), ConfigError);
    o.batches = 1;
    CHECK_THROWS_AS(gg_check(meas, GgFunctions{}, o), ConfigError);
}

}
