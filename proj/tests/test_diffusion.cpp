#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spinlab/diffusion.hpp"
#include "spinlab/errors.hpp"

using namespace spinlab;

namespace {

const PdeSolution& two_atom_solution() {
    static const MixtureSpec mix({{2, 1.0}});
    static const ParisiMeasure meas({{0.3, 0.5}, {0.7, 0.5}}, 0.3);
    static const PdeSolution sol = solve_pde(mix, meas, default_grid(mix, meas));
    return sol;
}

}  // namespace

TEST_SUITE("diffusion") {

TEST_CASE("time grid") {
    const ParisiMeasure meas({{0.3, 0.5}, {0.7, 0.5}}, 0.0);
    const std::vector<double> extra{0.123456, 0.5};
    const auto g = make_time_grid(meas, 1000, extra);
    CHECK(g.times.front() == 0.0);
    CHECK(g.times.back() == 1.0);
    CHECK(std::is_sorted(g.times.begin(), g.times.end()));
    CHECK(g.times[g.index_of(0.3)] == 0.3);
    CHECK(g.times[g.index_of(0.123456)] == 0.123456);
    CHECK_THROWS_AS(g.index_of(0.1234), ConfigError);
    // Refined near atoms: the step below 0.3 is a quarter of the base step.
    const std::size_t k = g.index_of(0.3);
    CHECK(g.times[k] - g.times[k - 1] == doctest::Approx(0.00025));
    CHECK(g.times[g.index_of(0.5) + 1] - 0.5 == doctest::Approx(0.001));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g.times[i] - g.times[i - 1] > 1e-5);
    CHECK_THROWS_AS(make_time_grid(meas, 999), ConfigError);
}

TEST_CASE("replicas with overlap q_* share their paths up to q_*") {
    const auto& sol = two_atom_solution();
    const auto q = make_ultrametric(2, {0.7, 0.7, 0.7, 0.7}, sol.measure());
    const auto b = simulate_bundle(sol, q, 1000, 5);
    const std::size_t kq = TimeGrid{b.times()}.index_of(0.7);
    for (std::size_t k = 0; k <= kq; ++k) {
        CHECK(b.X(0, k) == b.X(1, k));
        CHECK(b.Y(0, k) == b.Y(1, k));
    }
    CHECK(b.X(0, b.times().size() - 1) != b.X(1, b.times().size() - 1));
}

TEST_CASE("below a single atom there is no drift") {
    const MixtureSpec mix({{2, 1.0}});
    const ParisiMeasure meas({{0.6, 1.0}}, 0.2);
    const auto sol = solve_pde(mix, meas, default_grid(mix, meas));
    const auto b = simulate_bundle(sol, make_ultrametric(1, {0.6}, meas), 1000, 9);
    const std::size_t kq = TimeGrid{b.times()}.index_of(0.6);
    for (std::size_t k = 0; k <= kq; ++k) CHECK(b.X(0, k) == b.Y(0, k));
    CHECK(b.X(0, kq + 5) != b.Y(0, kq + 5));
    CHECK(b.M(0, 0) == doctest::Approx(sol.ux(0.0, 0.2)));
}

TEST_CASE("magnetization is a martingale") {
    const auto& sol = two_atom_solution();
    const auto q = make_ultrametric(1, {0.7}, sol.measure());
    const std::vector<double> cps{0.2, 0.3, 0.5, 0.7, 1.0};
    const auto stats = ensemble_checkpoints(sol, q, 20000, 1000, cps, 21);
    const double m0 = sol.ux(0.0, 0.3);
    for (const auto& s : stats) {
        CAPTURE(s.t);
        CHECK(std::abs(s.magnetization.value - m0) <= 3 * s.magnetization.std_error);
    }
    // E X_1 - h = integral of xi'' m E u_x, and E u_x is constant.
    const double drift = drift_integral(sol.mixture(), sol.measure(), 0.0, 1.0) * m0;
    CHECK(std::abs(stats.back().field.value - 0.3 - drift) <= 3 * stats.back().field.std_error);
}

TEST_CASE("bracket of two cavity fields") {
    const auto& sol = two_atom_solution();
    const auto& mix = sol.mixture();
    const std::vector<double> cps{0.1, 0.3, 0.5, 0.9};
    SUBCASE("overlap 0.3") {
        const auto q = make_ultrametric(2, {0.7, 0.3, 0.3, 0.7}, sol.measure());
        const auto stats = ensemble_checkpoints(sol, q, 20000, 1000, cps, 4);
        for (const auto& s : stats) {
            CAPTURE(s.t);
            CHECK(s.bracket_target == doctest::Approx(mix.xi_prime(std::min(s.t, 0.3))));
            CHECK(std::abs(s.bracket.value - s.bracket_target) <= 3 * s.bracket.std_error);
        }
        // Constant after q: the increments decorrelate.
        CHECK(stats[3].bracket.value == doctest::Approx(stats[1].bracket.value).epsilon(0.02));
    }
    SUBCASE("overlap 0") {
        const auto q = make_ultrametric(2, {0.7, 0.0, 0.0, 0.7}, sol.measure());
        const auto stats = ensemble_checkpoints(sol, q, 20000, 1000, cps, 6);
        for (const auto& s : stats) CHECK(std::abs(s.bracket.value) <= 3 * s.bracket.std_error);
    }
}

TEST_CASE("pathwise bracket along one bundle") {
    const auto& sol = two_atom_solution();
    const auto q = make_ultrametric(3, {0.7, 0.3, 0.0, 0.3, 0.7, 0.0, 0.0, 0.0, 0.7}, sol.measure());
    const auto b = simulate_bundle(sol, q, 4000, 12);
    const auto br = empirical_bracket(b, 0, 1);
    const std::size_t kq = TimeGrid{b.times()}.index_of(0.3);
    // Shared noise gives an exact quadratic variation on [0, q].
    CHECK(std::abs(br[kq] - sol.mixture().xi_prime(0.3)) < 0.05);
    CHECK(std::abs(br.back() - br[kq]) < 0.1);
    CHECK(std::abs(empirical_bracket(b, 0, 2).back()) < 0.1);
    CHECK_THROWS_AS(empirical_bracket(b, 1, 1), ConfigError);
    CHECK_THROWS_AS(empirical_bracket(b, 0, 3), ConfigError);
}

TEST_CASE("conditional continuations") {
    const auto& sol = two_atom_solution();
    const auto q = make_ultrametric(1, {0.7}, sol.measure());
    const auto b = simulate_bundle(sol, q, 1000, 33);
    const TimeGrid grid{b.times()};
    SUBCASE("q = 1 freezes the endpoint") {
        const auto c = conditional_continuation(sol, b, 0, 1.0, 10, 1);
        for (double x : c.x1) CHECK(x == b.X(0, grid.size() - 1));
    }
    SUBCASE("q = q_*: mean tanh(X_1) is tanh(X_q)") {
        const auto c = conditional_continuation(sol, b, 0, 0.7, 4000, 2);
        double m = 0, v = 0;
        for (double s : c.tanh_x1) m += s;
        m /= c.tanh_x1.size();
        for (double s : c.tanh_x1) v += (s - m) * (s - m);
        const double se = std::sqrt(v / (c.tanh_x1.size() - 1) / c.tanh_x1.size());
        CHECK(std::abs(m - std::tanh(b.X(0, grid.index_of(0.7)))) <= 3 * se);
        CHECK(c.mean_s() == doctest::Approx(m));
    }
    SUBCASE("q = first atom: mean X_1 follows the drift") {
        const auto c = conditional_continuation(sol, b, 0, 0.3, 4000, 3);
        const double xq = b.X(0, grid.index_of(0.3));
        const double target = xq + drift_integral(sol.mixture(), sol.measure(), 0.3, 1.0) * sol.ux(0.3, xq);
        double m = c.mean_y(), v = 0;
        for (double x : c.x1) v += (x - m) * (x - m);
        const double se = std::sqrt(v / (c.x1.size() - 1) / c.x1.size());
        CHECK(std::abs(m - target) <= 3 * se);
    }
}

TEST_CASE("results do not depend on the thread count") {
    const auto& sol = two_atom_solution();
    const auto q = make_ultrametric(2, {0.7, 0.3, 0.3, 0.7}, sol.measure());
    const std::vector<double> cps{0.5, 1.0};
    const auto a = ensemble_checkpoints(sol, q, 5000, 1000, cps, 8, 1);
    const auto b = ensemble_checkpoints(sol, q, 5000, 1000, cps, 8, 3);
    for (std::size_t c = 0; c < cps.size(); ++c) {
        CHECK(a[c].magnetization.value == b[c].magnetization.value);
        CHECK(a[c].bracket.value == b[c].bracket.value);
    }
    const auto other = ensemble_checkpoints(sol, q, 5000, 1000, cps, 9, 1);
    CHECK(other[1].field.value != a[1].field.value);
}

TEST_CASE("invalid inputs") {
    const auto& sol = two_atom_solution();
    CHECK_THROWS_AS(simulate_bundle(sol, UltrametricMatrix(2, {0.7, 0.5, 0.5, 0.7}), 1000, 1), ConfigError);
    CHECK_THROWS_AS(ensemble_checkpoints(sol, make_ultrametric(1, {0.7}, sol.measure()), 1, 1000, {}, 1),
                    ConfigError);
}

}
