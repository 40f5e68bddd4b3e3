#include <doctest.h>

#include <cmath>
#include <string>

#include "spinlab/config.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/stats.hpp"

using namespace spinlab;

namespace {

std::string error_of(const std::string& text) {
    try {
        RunConfig cfg;
        cfg.merge_text(text, "case.toml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("parsing") {
    std::map<std::string, int> lines;
    const auto j = parse_config_text("# comment\n[model]\nh = 0.25  # trailing\nmixture = [\n  [2, 1.0],\n  [3, 0.5]\n]\n"
                                     "[gg]\nf = \"R12 # not a comment\"\n",
                                     "t", &lines);
    CHECK(j["model"]["h"] == 0.25);
    CHECK(j["model"]["mixture"].size() == 2);
    CHECK(j["gg"]["f"] == "R12 # not a comment");
    CHECK(lines.at("model.mixture") == 4);
    CHECK(lines.at("gg.f") == 9);
}

TEST_CASE("parse errors name the origin and line") {
    CHECK(error_of("[model]\nh = \n").find("case.toml:2") != std::string::npos);
    CHECK(error_of("[model\n").find("case.toml:1") != std::string::npos);
    CHECK(error_of("[model]\nh 0.3\n").find("case.toml:2") != std::string::npos);
    CHECK(error_of("[model]\nmixture = [[2, 1.0]\n").find("unbalanced") != std::string::npos);
    CHECK(error_of("[model]\nh = 0.1\nh = 0.2\n").find("duplicate") != std::string::npos);
    CHECK(error_of("[model]\nh = 0.1\n[model]\n").find("duplicate") != std::string::npos);
}

TEST_CASE("unknown keys and type mismatches are rejected") {
    CHECK(error_of("[model]\nbeta = 1\n").find("model.beta") != std::string::npos);
    CHECK(error_of("[nonsense]\nx = 1\n").find("unknown section") != std::string::npos);
    CHECK(error_of("[model]\nh = \"high\"\n").find("expects a number") != std::string::npos);
    CHECK(error_of("[zeta]\nreplica_symmetric = 1\n") != "");
    CHECK(error_of("[model]\nh = 0.1\n").empty());
}

TEST_CASE("values are validated when used") {
    RunConfig cfg;
    cfg.apply_override("model.mixture=[[1, 1.0]]");
    CHECK_THROWS_AS(cfg.mixture(), ConfigError);
    RunConfig a;
    a.apply_override("zeta.atoms=[[0.3, 0.5], [0.7, 0.4]]");
    CHECK_THROWS_AS(a.measure(), ConfigError);
    RunConfig b;
    b.apply_override("run.threads=0");
    CHECK_THROWS_AS(b.threads(), ConfigError);
    RunConfig c;
    c.apply_override("grid.dx=0");
    CHECK_THROWS_AS(c.grid(c.mixture(), c.measure()), ConfigError);
    RunConfig d;
    d.apply_override("simulate.paths=1.5");
    CHECK_THROWS_AS(d.count("simulate", "paths"), ConfigError);
}

TEST_CASE("overrides and seeds") {
    RunConfig cfg;
    cfg.merge_text("[model]\nh = 0.1\n", "a");
    cfg.apply_override("model.h=0.2");
    CHECK(cfg.number("model", "h") == 0.2);
    cfg.apply_override("gg.f=R12 * R13");
    CHECK(cfg.string("gg", "f") == "R12 * R13");
    cfg.set_seed(77);
    CHECK(cfg.seed() == 77);
    CHECK_THROWS_AS(cfg.apply_override("model.h"), ConfigError);
    CHECK_THROWS_AS(cfg.apply_override("model.nothing=1"), ConfigError);
}

TEST_CASE("replica-symmetric measure and resolved output") {
    RunConfig cfg;
    cfg.merge_text("[model]\nmixture = [[2, 0.5]]\nh = 0.3\n[zeta]\nreplica_symmetric = true\n", "rs");
    const auto meas = cfg.measure();
    REQUIRE(meas.size() == 1);
    CHECK(meas.atoms()[0].location == doctest::Approx(rs_fixed_point(cfg.mixture(), 0.3)));
    CHECK(meas.h() == 0.3);
    const auto r = cfg.resolved();
    CHECK(r["zeta"]["resolved_atoms"].size() == 1);
    CHECK(r["grid"]["resolved"]["nx"].get<int>() % 2 == 1);
    CHECK(r["grid"]["resolved"]["x_halfwidth"].get<double>() > 0.0);
}

}
