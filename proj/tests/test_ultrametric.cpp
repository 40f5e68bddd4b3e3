#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spinlab/errors.hpp"
#include "spinlab/numerics.hpp"
#include "spinlab/ultrametric.hpp"

using namespace spinlab;

TEST_SUITE("ultrametric") {

TEST_CASE("validation examples") {
    const ParisiMeasure meas({{0.2, 0.3}, {0.4, 0.3}, {0.6, 0.2}, {0.9, 0.2}}, 0.0);
    CHECK(validate_ultrametric(UltrametricMatrix(2, {0.9, 0.4, 0.4, 0.9}), meas).valid);
    const UltrametricMatrix bad(3, {0.9, 0.6, 0.2, 0.6, 0.9, 0.4, 0.2, 0.4, 0.9});
    const auto v = validate_ultrametric(bad, meas);
    CHECK_FALSE(v.valid);
    CHECK(v.triple == std::array<std::size_t, 3>{1, 2, 3});
    CHECK_THROWS_AS(make_ultrametric(3, bad.entries(), meas), ConfigError);
    // Asymmetric, wrong diagonal, entry off the support.
    CHECK_FALSE(validate_ultrametric(UltrametricMatrix(2, {0.9, 0.4, 0.2, 0.9}), meas).valid);
    CHECK_FALSE(validate_ultrametric(UltrametricMatrix(2, {0.8, 0.4, 0.4, 0.8}), meas).valid);
    CHECK_FALSE(validate_ultrametric(UltrametricMatrix(2, {0.9, 0.5, 0.5, 0.9}), meas).valid);
    CHECK(validate_ultrametric(UltrametricMatrix(2, {0.9, 0.0, 0.0, 0.9}), meas).valid);
}

TEST_CASE("single atom: one leaf of weight one") {
    const ParisiMeasure meas({{0.4, 1.0}}, 0.0);
    const auto c = sample_cascade(meas, 100, 7);
    CHECK(c.leaf_count() == 1);
    CHECK(c.weights()[0] == 1.0);
    const auto q = sample_overlaps(c, 5, 3);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) CHECK(q(i, j) == 0.4);
    Rng rng(1);
    const auto e = sample_overlap_array(meas, 4, rng);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(e(i, j) == 0.4);
}

TEST_CASE("n = 1 gives [q_*]") {
    const ParisiMeasure meas({{0.3, 0.5}, {0.7, 0.5}}, 0.0);
    Rng rng(2);
    const auto q = sample_overlap_array(meas, 1, rng);
    CHECK(q.size() == 1);
    CHECK(q(0, 0) == 0.7);
}

TEST_CASE("cascade structure") {
    const ParisiMeasure meas({{0.2, 0.3}, {0.5, 0.3}, {0.8, 0.4}}, 0.1);
    const auto c = sample_cascade(meas, 60, 11);
    CHECK(c.depth() == 3);
    CHECK(c.branching() == std::vector<double>{0.0, 0.3, 0.6});
    double total = 0.0;
    for (double w : c.weights()) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // Children of every node come in decreasing order of their Poisson points.
    for (const auto& n : c.nodes())
        for (std::int32_t k = 1; k < n.n_children; ++k)
            CHECK(c.nodes()[n.first_child + k - 1].log_point >= c.nodes()[n.first_child + k].log_point);
    CHECK(c.tail_mass()[0] == 0.0);
    CHECK(c.tail_mass()[1] > 0.0);
    CHECK(c.tail_mass()[2] > c.tail_mass()[1]);
    CHECK(c.overlap(0, 0) == 0.8);
    CHECK(c.path(c.leaf_count() - 1).size() == 3);
    CHECK_THROWS_AS(sample_cascade(meas, 10, 1), ConfigError);
}

TEST_CASE("sampled arrays are always valid") {
    const ParisiMeasure meas({{0.1, 0.2}, {0.45, 0.3}, {0.8, 0.5}}, 0.0);
    Rng rng(5);
    bool all = true;
    for (int i = 0; i < 10000; ++i) all = all && validate_ultrametric(sample_overlap_array(meas, 6, rng), meas).valid;
    CHECK(all);
    bool all_cascade = true;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto c = sample_cascade(meas, 50, s);
        for (std::uint64_t k = 0; k < 200; ++k)
            all_cascade = all_cascade && validate_ultrametric(sample_overlaps(c, 6, s * 1000 + k), meas).valid;
    }
    CHECK(all_cascade);
}

TEST_CASE("overlap law reproduces zeta (exact sampler)") {
    const ParisiMeasure meas({{0.3, 0.5}, {0.7, 0.5}}, 0.0);
    Rng rng(9);
    const int n = 100000;
    MeanAccumulator hi, all3;
    for (int i = 0; i < n; ++i) {
        const auto q = sample_overlap_array(meas, 3, rng);
        hi.add(q(0, 1) == 0.7 ? 1.0 : 0.0);
        all3.add(q(0, 1) == 0.7 && q(0, 2) == 0.7 && q(1, 2) == 0.7 ? 1.0 : 0.0);
    }
    CHECK(std::abs(hi.mean() - 0.5) <= 3 * hi.std_error());
    // Three replicas in one block of a PD(1/2) partition: (1 - a)(2 - a) / 2 = 3/8.
    CHECK(std::abs(all3.mean() - 0.375) <= 3 * all3.std_error());
}

TEST_CASE("overlap law reproduces zeta (truncated cascade)") {
    const ParisiMeasure meas({{0.3, 0.5}, {0.7, 0.5}}, 0.0);
    MeanAccumulator per_cascade;
    for (std::uint64_t s = 0; s < 2000; ++s) {
        const auto c = sample_cascade(meas, 200, s);
        const auto& w = c.weights();
        double same = 0.0;  // P(R12 = 0.7 | cascade) = sum of squared weights
        for (double x : w) same += x * x;
        per_cascade.add(same);
    }
    CHECK(std::abs(per_cascade.mean() - 0.5) <= 3 * per_cascade.std_error());
}

TEST_CASE("untilted fields") {
    const MixtureSpec mix({{2, 1.0}});
    const ParisiMeasure one({{0.4, 1.0}}, 0.25);
    auto c = sample_cascade(one, 50, 3);
    for (auto& n : c.nodes()) n.eta = 0.0;
    CHECK(untilted_field(c, mix, 0) == 0.25);

    MeanAccumulator var;
    for (std::uint64_t s = 0; s < 20000; ++s) {
        const double f = untilted_field(sample_cascade(one, 50, s), mix, 0) - 0.25;
        var.add(f * f);
    }
    CHECK(std::abs(var.mean() - mix.xi_prime(0.4)) <= 3 * var.std_error());

    // Two leaves meeting at depth 1 share the first increment only.
    const ParisiMeasure two({{0.3, 0.5}, {0.7, 0.5}}, 0.0);
    MeanAccumulator cov;
    for (std::uint64_t s = 0; s < 20000; ++s) {
        const auto cas = sample_cascade(two, 50, 100000 + s);
        REQUIRE(cas.meet_depth(0, 1) == 1);
        cov.add(untilted_field(cas, mix, 0) * untilted_field(cas, mix, 1));
    }
    CHECK(std::abs(cov.mean() - mix.xi_prime(0.3)) <= 3 * cov.std_error());
    const auto inc = cascade_increments(mix, level_knots(two));
    CHECK(inc[0] == doctest::Approx(std::sqrt(0.6)));
    CHECK(inc[1] == doctest::Approx(std::sqrt(0.8)));
}

}
