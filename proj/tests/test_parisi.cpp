#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "spinlab/errors.hpp"
#include "spinlab/parisi.hpp"
#include "spinlab/quadrature.hpp"

using namespace spinlab;

namespace {

PdeSolution solve_default(const MixtureSpec& mix, const ParisiMeasure& meas) {
    return solve_pde(mix, meas, default_grid(mix, meas));
}

}  // namespace

TEST_SUITE("parisi") {

TEST_CASE("terminal condition") {
    const MixtureSpec mix({{2, 1.0}});
    const ParisiMeasure meas({{0.4, 1.0}}, 0.2);
    const auto sol = solve_default(mix, meas);
    CHECK(std::abs(sol.u(1.0, 0.0)) <= 1e-14);
    CHECK(query_ux(sol, 1.0, 0.0) == doctest::Approx(0.0));
    CHECK(sol.times().front() == 0.0);
    CHECK(sol.times().back() == 1.0);
    CHECK(sol.slice_index(0.4) != PdeSolution::npos);
}

TEST_CASE("above q_* the solution is log cosh plus a constant") {
    // With m = 1 the Cole-Hopf transform turns the equation into the heat
    // equation, whose solution from cosh(x) is cosh(x) exp((xi'(1) - xi'(t)) / 2).
    const MixtureSpec mix({{2, 1.0}});
    const ParisiMeasure meas({{0.3, 0.5}, {0.6, 0.5}}, 0.3);
    const auto sol = solve_default(mix, meas);
    double worst_u = 0.0;
    for (double t : {0.6, 0.7, 0.85, 1.0})
        for (double x : {-3.0, -1.0, 0.0, 0.4, 2.5}) {
            const double exact = log_cosh(x) + 0.5 * (mix.xi_prime(1.0) - mix.xi_prime(t));
            worst_u = std::max(worst_u, std::abs(sol.u(t, x) - exact));
            CHECK(std::abs(sol.ux(t, x) - std::tanh(x)) <= 1e-4);
        }
    CHECK(worst_u <= 1e-4);
    CHECK(plateau_error(sol) <= 1e-4);
    CHECK(std::abs(sol.ux(0.6, 2.0) - 0.96402758) <= 1e-4);
}

TEST_CASE("below a single atom the equation is the backward heat equation") {
    const MixtureSpec mix({{2, 1.0}});
    const double q0 = 0.5;
    const ParisiMeasure meas({{q0, 1.0}}, 0.0);
    const auto sol = solve_default(mix, meas);
    const GaussHermite rule(80);
    for (double t : {0.0, 0.2, 0.45})
        for (double x : {-1.0, 0.0, 0.7, 2.0}) {
            const double sd = std::sqrt(mix.xi_prime(q0) - mix.xi_prime(t));
            const double shift = 0.5 * (mix.xi_prime(1.0) - mix.xi_prime(q0));
            const double oracle = rule.integrate([&](double z) { return log_cosh(x + sd * z) + shift; });
            CHECK(std::abs(sol.u(t, x) - oracle) <= 5e-4);
        }
}

TEST_CASE("grid nodes return stored values") {
    const MixtureSpec mix({{2, 0.7}});
    const ParisiMeasure meas({{0.35, 1.0}}, 0.1);
    const auto sol = solve_default(mix, meas);
    const auto times = sol.times();
    for (std::size_t k : {std::size_t{0}, times.size() / 3, times.size() - 1})
        for (std::size_t j : {std::size_t{10}, sol.nx() / 2, sol.nx() - 11}) {
            CHECK(sol.ux(times[k], sol.x(j)) == sol.ux_slice(k)[j]);
            CHECK(sol.u(times[k], sol.x(j)) == sol.u_slice(k)[j]);
        }
}

TEST_CASE("u_x is odd in x when h plays no role, and bounded by one") {
    const MixtureSpec mix({{2, 1.0}, {3, 0.5}});
    const ParisiMeasure meas({{0.2, 0.4}, {0.55, 0.6}}, 0.0);
    const auto sol = solve_default(mix, meas);
    for (double t : {0.0, 0.3, 0.55})
        for (double x : {0.3, 1.2, 4.0}) {
            CHECK(sol.ux(t, x) == doctest::Approx(-sol.ux(t, -x)).epsilon(1e-10));
            CHECK(std::abs(sol.ux(t, x)) < 1.0);
            CHECK(sol.uxx(t, x) > 0.0);
        }
    CHECK_THROWS_AS(sol.ux(0.0, sol.grid().x_halfwidth + 1.0), DomainError);
}

TEST_CASE("Cole-Hopf steps on linear and quadratic inputs") {
    const FieldGrid fg{-10.0, 10.0, 2001};
    const GaussHermite rule(60);
    const UniformTable linear(fg.lo, fg.hi, [&] {
        std::vector<double> v(fg.n);
        for (std::size_t i = 0; i < fg.n; ++i) v[i] = fg.lo + (fg.hi - fg.lo) * i / (fg.n - 1.0);
        return v;
    }(), 1.0, 1.0);
    const double sigma = 0.8;
    // E exp(m (s + sigma z)) = exp(m s + m^2 sigma^2 / 2).
    for (double m : {0.0, 0.5, 1.0}) {
        const auto t = cole_hopf_step(linear, m, sigma, fg, rule);
        for (double s : {-2.0, 0.0, 1.5}) CHECK(t(s) == doctest::Approx(s + 0.5 * m * sigma * sigma).epsilon(1e-10));
    }
    CHECK_THROWS_AS(cole_hopf_step(linear, 1.5, sigma, fg, rule), DomainError);
}

TEST_CASE("Cole-Hopf recursion agrees with the finite-difference solve") {
    const MixtureSpec mix({{2, 1.0}});
    const ParisiMeasure meas({{0.3, 0.5}, {0.7, 0.5}}, 0.4);
    const auto grid = default_grid(mix, meas);
    const auto sol = solve_pde(mix, meas, grid);
    const auto levels = cole_hopf_levels(mix, meas, default_field_grid(grid));
    CHECK(levels.depth() == 2);
    CHECK(std::abs(levels(0, 0.4) - sol.u(0.0, 0.4)) <= 5e-3);
    for (std::size_t k = 0; k <= levels.depth(); ++k)
        for (double s : {-1.0, 0.4, 2.0}) CHECK(std::abs(levels(k, s) - sol.u(levels.knots[k], s)) <= 5e-3);
}

TEST_CASE("grid validation") {
    const MixtureSpec mix({{2, 1.0}});
    const ParisiMeasure meas({{0.5, 1.0}}, 0.0);
    auto g = default_grid(mix, meas);
    CHECK_NOTHROW(validate_grid(g, meas));
    auto bad = g;
    bad.nx = 400;
    CHECK_THROWS_AS(validate_grid(bad, meas), ConfigError);
    bad = g;
    bad.x_halfwidth = 3.0;
    CHECK_THROWS_AS(validate_grid(bad, meas), ConfigError);
    bad = g;
    bad.dt_max = 0.0;
    CHECK_THROWS_AS(validate_grid(bad, meas), ConfigError);
    bad = g;
    bad.time_knots = {0.0, 1.0};
    CHECK_THROWS_AS(validate_grid(bad, meas), ConfigError);
}

TEST_CASE("binary and csv dumps") {
    const MixtureSpec mix({{2, 0.5}});
    const ParisiMeasure meas({{0.2, 1.0}}, 0.0);
    auto grid = default_grid(mix, meas);
    grid.n_slices = 10;
    const auto sol = solve_pde(mix, meas, grid);
    std::ostringstream bin, csv;
    write_solution_binary(sol, bin);
    write_solution_csv(sol, csv);
    const auto b = bin.str();
    const std::size_t nt = sol.times().size(), nx = sol.nx();
    CHECK(b.substr(0, 8) == "SPNPDE01");
    CHECK(b.size() == 8 + 16 + 8 * (nt + nx + 2 * nt * nx));
    std::uint64_t read_nx = 0;
    std::memcpy(&read_nx, b.data() + 16, 8);
    CHECK(read_nx == nx);
    const auto c = csv.str();
    CHECK(c.rfind("t,x,u,ux\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(c.begin(), c.end(), '\n')) == 1 + nt * nx);
}

}
