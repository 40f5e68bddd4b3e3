#include <doctest.h>

#include <cmath>

#include "spinlab/errors.hpp"
#include "spinlab/quadrature.hpp"
#include "spinlab/tilted.hpp"

using namespace spinlab;

namespace {

struct Moments {
    double m1 = 0, m2 = 0, se1 = 0, se2 = 0;
};

template <class Draw>
Moments sample_moments(std::size_t n, Draw&& draw) {
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = draw();
        s1 += z;
        s2 += z * z;
        s3 += z * z * z;
        s4 += z * z * z * z;
    }
    const double N = static_cast<double>(n);
    Moments m;
    m.m1 = s1 / N;
    m.m2 = s2 / N;
    m.se1 = std::sqrt((m.m2 - m.m1 * m.m1) / N);
    m.se2 = std::sqrt((s4 / N - m.m2 * m.m2) / N);
    (void)s3;
    return m;
}

struct Model {
    MixtureSpec mix;
    ParisiMeasure meas;
    ColeHopfLevels levels;
};

Model model(std::vector<Atom> atoms, double beta = 1.0, double h = 0.3) {
    MixtureSpec mix({{2, beta}});
    ParisiMeasure meas(std::move(atoms), h);
    auto levels = cole_hopf_levels(mix, meas, default_field_grid(default_grid(mix, meas)));
    return {mix, meas, std::move(levels)};
}

}  // namespace

TEST_SUITE("tilted") {

TEST_CASE("zero exponent gives the standard Gaussian") {
    const KernelTable k([](double s) { return s * s; }, [](double s) { return s; }, 0.0, 0.7, -5.0, 5.0);
    CHECK(k.density(0.3, 0.5) == doctest::Approx(gaussian_pdf(0.5)));
    Rng rng(1);
    const auto m = sample_moments(50000, [&] { return k.sample(1.0, rng); });
    CHECK(std::abs(m.m1) <= 3 * m.se1);
    CHECK(std::abs(m.m2 - 1.0) <= 3 * m.se2);
}

TEST_CASE("deepest level with exponent one: cosh-tilted Gaussian") {
    // cosh(s + sigma z) phi(z) / (cosh(s) e^{sigma^2/2}) is the mixture of
    // N(sigma, 1) and N(-sigma, 1) with weights e^{+-s} / (2 cosh s), so
    // E z = sigma tanh(s) and E z^2 = 1 + sigma^2.
    const double sigma = 0.9;
    const KernelTable k([](double s) { return log_cosh(s); },
                        [sigma](double s) { return log_cosh(s) + 0.5 * sigma * sigma; }, 1.0, sigma, -6.0, 6.0);
    CHECK(k.max_normalization_error() <= KernelTable::tolerance);
    for (double s : {-1.3, 0.0, 0.45, 2.0}) {
        Rng rng(static_cast<std::uint64_t>(100 + 10 * s));
        const auto m = sample_moments(60000, [&] { return k.sample(s, rng); });
        CAPTURE(s);
        CHECK(std::abs(m.m1 - sigma * std::tanh(s)) <= 3 * m.se1);
        CHECK(std::abs(m.m2 - (1 + sigma * sigma)) <= 3 * m.se2);
    }
    const double s = 0.45, z = 0.8;
    const double exact = std::cosh(s + sigma * z) * gaussian_pdf(z) / (std::cosh(s) * std::exp(0.5 * sigma * sigma));
    CHECK(k.density(s, z) == doctest::Approx(exact).epsilon(1e-3));
    Rng rng(7);
    CHECK_THROWS_AS(k.sample(10.0, rng), DomainError);
}

TEST_CASE("kernel rows are normalized") {
    const auto m = model({{0.3, 0.5}, {0.7, 0.5}});
    const auto kernels = build_tilt_kernels(m.mix, m.meas, m.levels);
    CHECK(kernels.tables.size() == 2);
    CHECK(kernels.tables[0].exponent() == 0.0);
    CHECK(kernels.tables[1].exponent() == 0.5);
    CHECK(kernels.max_normalization_error() <= KernelTable::tolerance);
}

TEST_CASE("tilted fields accumulate the tilted increments") {
    const auto m = model({{0.3, 0.5}, {0.7, 0.5}});
    const auto kernels = build_tilt_kernels(m.mix, m.meas, m.levels);
    const auto cascade = sample_cascade(m.meas, 60, 4);
    const auto tc = sample_tilted(cascade, kernels, 9);
    for (std::size_t leaf : {std::size_t{0}, std::size_t{7}, cascade.leaf_count() - 1}) {
        double s = m.meas.h();
        for (std::size_t node : cascade.path(leaf)) {
            const auto d = static_cast<std::size_t>(cascade.nodes()[node].depth);
            s += kernels.increments[d - 1] * tc.eta[node];
        }
        CHECK(tilted_field(tc, leaf) == doctest::Approx(s).epsilon(1e-14));
    }
    const auto other = sample_cascade(model({{0.5, 1.0}}).meas, 60, 4);
    CHECK_THROWS_AS(sample_tilted(other, kernels, 1), ConfigError);
}

TEST_CASE("tilted leaf field has the law of X at q_*") {
    for (auto atoms : {std::vector<Atom>{{0.5, 1.0}}, std::vector<Atom>{{0.3, 0.5}, {0.7, 0.5}}}) {
        const auto m = model(atoms);
        const auto sol = solve_pde(m.mix, m.meas, default_grid(m.mix, m.meas));
        const auto rep = law_equivalence_check(sol, m.levels, 30000, 1000, 5);
        CAPTURE(atoms.size());
        CHECK(rep.pass);
        // First moment: E X_{q_*} - h = C(0, q_*) u_x(0, h).
        const double drift = drift_integral(m.mix, m.meas, 0.0, m.meas.q_star()) * sol.ux(0.0, m.meas.h());
        CHECK(std::abs(rep.tilted[0].value - drift) <= 3 * rep.tilted[0].std_error + 1e-3);
    }
}

TEST_CASE("tilting identity") {
    TiltingOptions o;
    o.n_samples = 20000;
    o.seed = 12;
    SUBCASE("no sites: both sides are one") {
        const auto m = model({{0.3, 0.5}, {0.7, 0.5}});
        o.n_sites = 0;
        o.n_samples = 300;
        const auto rep = tilting_identity_check(m.mix, m.meas, m.levels, o);
        CHECK(rep.reweighted.value == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(rep.tilted.value == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(rep.pass);
    }
    SUBCASE("one level") {
        const auto m = model({{0.5, 1.0}});
        const auto rep = tilting_identity_check(m.mix, m.meas, m.levels, o);
        CHECK(rep.pass);
    }
    SUBCASE("two levels, one and two sites") {
        const auto m = model({{0.3, 0.5}, {0.7, 0.5}});
        CHECK(tilting_identity_check(m.mix, m.meas, m.levels, o).pass);
        o.n_sites = 2;
        o.n_samples = 10000;
        CHECK(tilting_identity_check(m.mix, m.meas, m.levels, o).pass);
    }
    SUBCASE("limits") {
        const auto m = model({{0.2, 0.3}, {0.5, 0.3}, {0.8, 0.4}});
        CHECK_THROWS_AS(tilting_identity_check(m.mix, m.meas, m.levels, o), ConfigError);
    }
}

}
