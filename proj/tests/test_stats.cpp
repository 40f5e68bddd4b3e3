#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spinlab/diffusion.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/quadrature.hpp"
#include "spinlab/stats.hpp"

using namespace spinlab;

namespace {

PdeSolution solve_default(const MixtureSpec& mix, const ParisiMeasure& meas) {
    return solve_pde(mix, meas, default_grid(mix, meas));
}

MomentOptions small_options(std::size_t n_outer, std::uint64_t seed) {
    MomentOptions o;
    o.n_outer = n_outer;
    o.steps = 1000;
    o.seed = seed;
    return o;
}

bool agree(const StatResult& a, const StatResult& b) {
    return std::abs(a.value - b.value) <= 3.0 * std::hypot(a.std_error, b.std_error);
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("moment queries are validated") {
    MomentQuery q;
    CHECK_THROWS_AS(q.validate(), ConfigError);
    q.sets = {{1}, {}};
    CHECK_THROWS_AS(q.validate(), ConfigError);
    q.sets = {{1}, {2}};
    CHECK_THROWS_AS(q.validate(), ConfigError);
    q.n_sites = 2;
    CHECK_NOTHROW(q.validate());
    q.n_sites = 0;
    CHECK_THROWS_AS(q.validate(), ConfigError);
}

TEST_CASE("one replica, one site: E s = u_x(0, h)") {
    const MixtureSpec mix({{2, 1.0}});
    const auto sol = solve_default(mix, ParisiMeasure({{0.3, 0.5}, {0.7, 0.5}}, 0.3));
    MomentQuery q;
    q.sets = {{1}};
    const auto r = moment_mc(sol, q, small_options(20000, 1));
    CHECK(std::abs(r.value - sol.ux(0.0, 0.3)) <= 3 * r.std_error);
    CHECK(tree_moment_pde(sol, {{0.7, 1}}) == doctest::Approx(sol.ux(0.0, 0.3)).epsilon(1e-4));

    const auto sym = solve_default(mix, ParisiMeasure({{0.3, 0.5}, {0.7, 0.5}}, 0.0));
    const auto r0 = moment_mc(sym, q, small_options(20000, 2));
    CHECK(std::abs(r0.value) <= 3 * r0.std_error);
}

TEST_CASE("single atom: two replicas share the path") {
    const MixtureSpec mix({{2, 1.0}});
    const double qa = 0.4, h = 0.3;
    const auto sol = solve_default(mix, ParisiMeasure({{qa, 1.0}}, h));
    // X_q = h + sqrt(xi'(q)) z below the atom and u_x(q, x) = tanh(x) at q_*.
    const double oracle = GaussHermite(120).integrate([&](double z) {
        const double t = std::tanh(h + std::sqrt(mix.xi_prime(qa)) * z);
        return t * t;
    });
    CHECK(tree_moment_pde(sol, {{qa, 2}}) == doctest::Approx(oracle).epsilon(2e-4));
    MomentQuery q;
    q.sets = {{1}, {1}};
    const auto r = moment_mc(sol, q, small_options(20000, 3));
    CHECK(std::abs(r.value - oracle) <= 3 * r.std_error);
}

TEST_CASE("tree moments against direct path simulation") {
    const MixtureSpec mix({{2, 1.0}});
    const ParisiMeasure meas({{0.3, 0.5}, {0.7, 0.5}}, 0.3);
    const auto sol = solve_default(mix, meas);
    const double a = 0.3, b = 0.7;
    const std::vector<double> extra{a, b};
    PathEngine engine(sol, make_time_grid(meas, 1000, extra));
    const std::size_t n = 40000;
    ClusterPlan plan(level_knots(meas), 1);
    plan.add_independent(n);
    Ensemble ens(n, 1, 0.3);
    const std::size_t ka = engine.grid().index_of(a), kb = engine.grid().index_of(b);
    std::vector<char> watch(engine.grid().size(), 0);
    watch[ka] = watch[kb] = 1;
    std::vector<double> ma(n), mb(n);
    engine.advance(ens, plan, 0, kb, 77, "test", watch, [&](std::size_t k, std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) (k == ka ? ma : mb)[p] = sol.ux(engine.grid().times[k], ens.X[p]);
    });
    double s = 0, s2 = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const double v = ma[p] * mb[p] * mb[p];
        s += v;
        s2 += v * v;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(tree_moment_pde(sol, {{a, 1}, {b, 2}}) - mean) <= 3 * se);
    CHECK_THROWS_AS(tree_moment_pde(sol, {{b, 1}, {a, 2}}), DomainError);
    CHECK_THROWS_AS(tree_moment_pde(sol, {{0.9, 1}}), DomainError);
    CHECK_THROWS_AS(tree_moment_pde(sol, {}), ConfigError);
}

TEST_CASE("zeta concentrated at zero with no field") {
    const auto sol = solve_default(MixtureSpec({{2, 1.0}}), ParisiMeasure({{0.0, 1.0}}, 0.0));
    const auto two = two_spin(sol, small_options(100, 1));
    CHECK(two.pde.value == doctest::Approx(0.0));
    CHECK(two.mc.value == doctest::Approx(0.0));
    const auto three = three_spin(sol, small_options(100, 1));
    CHECK(three.closed.value == doctest::Approx(0.0));
    CHECK(three.mc.value == doctest::Approx(0.0));
}

TEST_CASE("two-spin routes at the replica-symmetric point") {
    const MixtureSpec mix({{2, 0.5}});
    const double h = 0.3;
    const double q_rs = rs_fixed_point(mix, h);
    const auto sol = solve_default(mix, ParisiMeasure({{q_rs, 1.0}}, h));
    const auto r = two_spin(sol, small_options(20000, 5));
    CHECK(r.mean.applicable);
    CHECK(r.mean.value == doctest::Approx(q_rs));
    CHECK(std::abs(r.pde.value - q_rs) <= 1e-3);
    CHECK(std::abs(r.mc.value - q_rs) <= std::max(3 * r.mc.std_error, 1e-2));
    CHECK(std::string(to_string(r.mc.method)) == "cascade-mc");
    CHECK(std::string(to_string(r.pde.method)) == "pde-tree");
}

TEST_CASE("two atoms: routes a and b agree, route c is flagged") {
    const auto sol = solve_default(MixtureSpec({{2, 1.0}}), ParisiMeasure({{0.3, 0.5}, {0.7, 0.5}}, 0.3));
    const auto r = two_spin(sol, small_options(20000, 6));
    CHECK(agree(r.pde, r.mc));
    CHECK_FALSE(r.mean.applicable);
    CHECK(r.mean.diagnostics.at("max_residual") > 1e-2);
}

TEST_CASE("three-spin closed form is a probability mix") {
    // With F = 1 the weights must sum to one.
    for (const auto& atoms : {std::vector<Atom>{{0.5, 1.0}}, std::vector<Atom>{{0.3, 0.5}, {0.7, 0.5}},
                              std::vector<Atom>{{0.1, 0.2}, {0.4, 0.5}, {0.9, 0.3}}}) {
        double printed = 0.0;
        const double v = three_spin_closed_form(ParisiMeasure(atoms, 0.0), [](auto, auto) { return 1.0; }, &printed);
        CHECK(v == doctest::Approx(1.0));
        if (atoms.size() > 1) CHECK(printed < 1.0);
    }
}

TEST_CASE("three-spin level weights match sampled overlap arrays") {
    const ParisiMeasure meas({{0.1, 0.2}, {0.4, 0.5}, {0.9, 0.3}}, 0.0);
    const auto atoms = meas.atoms();
    // Weight of each (x, y) level pair read off the closed form one entry at a time.
    std::vector<double> w(9, 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j <= i; ++j)
            w[i * 3 + j] = three_spin_closed_form(meas, [&](std::size_t x, std::size_t y) {
                return x == i && y == j ? 1.0 : 0.0;
            });
    // Empirical: largest overlap among the three pairs at x, smallest at y.
    Rng rng(4);
    const int n = 200000;
    std::vector<double> freq(9, 0.0);
    auto level = [&](double q) {
        for (std::size_t k = 0; k < 3; ++k)
            if (atoms[k].location == q) return k;
        return std::size_t{99};
    };
    for (int s = 0; s < n; ++s) {
        const auto q = sample_overlap_array(meas, 3, rng);
        const double hi = std::max({q(0, 1), q(0, 2), q(1, 2)}), lo = std::min({q(0, 1), q(0, 2), q(1, 2)});
        freq[level(hi) * 3 + level(lo)] += 1.0 / n;
    }
    for (std::size_t k = 0; k < 9; ++k) {
        const double se = std::sqrt(std::max(w[k] * (1 - w[k]), 1e-12) / n);
        CAPTURE(k);
        CHECK(std::abs(freq[k] - w[k]) <= 3.5 * se + 1e-12);
    }
}

TEST_CASE("three-spin routes agree for two atoms") {
    const auto sol = solve_default(MixtureSpec({{2, 0.5}}), ParisiMeasure({{0.3, 0.5}, {0.7, 0.5}}, 0.3));
    const auto r = three_spin(sol, small_options(20000, 8));
    CHECK(agree(r.closed, r.mc));
    CHECK(r.closed.diagnostics.count("printed_form") == 1);
}

TEST_CASE("state samples") {
    const double f = 0.4, v = 0.6;
    const auto s = state_sample(f, v, 100000, 3);
    double ms = 0, ms2 = 0, my = 0, my2 = 0;
    for (const auto& x : s) {
        ms += x.s;
        ms2 += 1.0;
        my += x.y;
        my2 += x.y * x.y;
    }
    const double n = static_cast<double>(s.size());
    ms /= n;
    my /= n;
    const double se_s = std::sqrt((1 - ms * ms) / n);
    CHECK(std::abs(ms - std::tanh(f)) <= 3 * se_s);
    // y has mean f + v tanh(f).
    const double se_y = std::sqrt((my2 / n - my * my) / n);
    CHECK(std::abs(my - (f + v * std::tanh(f))) <= 3 * se_y);
    for (const auto& x : state_sample(0.7, 0.0, 100, 1)) CHECK(x.y == 0.7);
    double m0 = 0;
    for (const auto& x : state_sample(0.0, 1.0, 40000, 2)) m0 += x.s;
    CHECK(std::abs(m0 / 40000) <= 3 / std::sqrt(40000.0));
    CHECK_THROWS_AS(state_sample(0.0, -1.0, 1, 1), DomainError);
}

TEST_CASE("replica-symmetric fixed point") {
    const MixtureSpec mix({{2, 0.5}});
    const double h = 0.3;
    const double q = rs_fixed_point(mix, h);
    // Independent check by a fine trapezoid rule.
    double trap = 0.0;
    const double dz = 5e-4;
    for (int i = -20000; i <= 20000; ++i) {
        const double z = i * dz;
        trap += std::pow(std::tanh(h + std::sqrt(mix.xi_prime(q)) * z), 2) * gaussian_pdf(z) * dz;
    }
    CHECK(q == doctest::Approx(trap).epsilon(1e-10));
    CHECK(rs_fixed_point(mix, 0.0) == doctest::Approx(0.0).epsilon(1e-6));
}

}
