#include "spinlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "spinlab/acceptance.hpp"
#include "spinlab/diffusion.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/finiten.hpp"
#include "spinlab/gg.hpp"
#include "spinlab/parisi.hpp"
#include "spinlab/rng.hpp"
#include "spinlab/stats.hpp"
#include "spinlab/tap.hpp"
#include "spinlab/tilted.hpp"

#ifndef SPINLAB_VERSION
#define SPINLAB_VERSION "0.0.0"
#endif

namespace spinlab {
namespace {

namespace fs = std::filesystem;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json estimate_json(const Estimate& e) { return {{"value", e.value}, {"se", e.std_error}}; }

Json stat_json(const StatResult& r) {
    Json d = Json::object();
    for (const auto& [k, v] : r.diagnostics) d[k] = v;
    return {{"value", r.value},
            {"se", r.std_error},
            {"method", to_string(r.method)},
            {"applicable", r.applicable},
            {"diagnostics", d}};
}

fs::path out_dir(const RunConfig& cfg) {
    fs::path dir = cfg.string("run", "out");
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    f << text;
}

Json header(const std::string& command, const RunConfig& cfg) {
    Json r;
    r["command"] = command;
    r["version"] = SPINLAB_VERSION;
    r["config"] = cfg.resolved();
    return r;
}

struct Model {
    MixtureSpec mixture;
    ParisiMeasure measure;
    PdeGrid grid;
};

Model model_of(const RunConfig& cfg) {
    auto mix = cfg.mixture();
    auto meas = cfg.measure();
    auto grid = cfg.grid(mix, meas);
    return {mix, meas, grid};
}

OverlapSampler sampler_of(const RunConfig& cfg, const std::string& section) {
    const auto s = cfg.string(section, "sampler");
    if (s == "exact") return OverlapSampler::exact;
    if (s == "cascade") return OverlapSampler::cascade;
    throw ConfigError("key '" + section + ".sampler' must be \"exact\" or \"cascade\", got \"" + s + "\"");
}

MomentOptions moment_options(const RunConfig& cfg) {
    MomentOptions o;
    o.n_outer = cfg.count("moment", "n_outer");
    o.n_paths = cfg.count("moment", "n_paths");
    o.steps = static_cast<int>(cfg.integer("moment", "steps"));
    o.batches = cfg.count("moment", "batches");
    o.sampler = sampler_of(cfg, "moment");
    o.truncation = cfg.count("moment", "truncation");
    o.arrays_per_cascade = cfg.count("moment", "arrays_per_cascade");
    o.seed = derive_seed(cfg.seed(), "moment");
    o.threads = cfg.threads();
    return o;
}

std::vector<double> number_list(const RunConfig& cfg, const std::string& section, const std::string& key) {
    std::vector<double> out;
    for (const auto& v : cfg.at(section, key)) {
        if (!v.is_number()) throw ConfigError("key '" + section + "." + key + "' must be a list of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

Json solve_pde_cmd(const RunConfig& cfg, std::ostream& log) {
    const auto m = model_of(cfg);
    auto sol = solve_pde(m.mixture, m.measure, m.grid);
    const auto levels = cole_hopf_levels(m.mixture, m.measure, default_field_grid(m.grid));
    const auto dir = out_dir(cfg);
    const auto format = cfg.string("grid", "format");
    std::string file;
    if (format == "csv") {
        file = "pde.csv";
        std::ofstream f(dir / file, std::ios::binary);
        write_solution_csv(sol, f);
    } else if (format == "binary") {
        file = "pde.bin";
        std::ofstream f(dir / file, std::ios::binary);
        write_solution_binary(sol, f);
    } else {
        throw ConfigError("key 'grid.format' must be \"csv\" or \"binary\", got \"" + format + "\"");
    }
    const double h = m.measure.h();
    const double plateau = plateau_error(sol);
    Json r = header("solve-pde", cfg);
    r["results"] = {{"u0", sol.u(0.0, h)},
                    {"ux0", sol.ux(0.0, h)},
                    {"cole_hopf_u0", levels(0, h)},
                    {"cole_hopf_difference", std::abs(levels(0, h) - sol.u(0.0, h))},
                    {"plateau_error", plateau},
                    {"plateau_ok", plateau <= m.grid.plateau_tolerance},
                    {"nx", sol.nx()},
                    {"n_times", sol.times().size()},
                    {"dump", file}};
    log << "solve-pde: u(0,h) = " << num(sol.u(0.0, h)) << ", plateau error " << num(plateau) << "\n";
    return r;
}

UltrametricMatrix overlap_matrix(const RunConfig& cfg, const ParisiMeasure& measure) {
    const auto& rows = cfg.at("simulate", "overlaps");
    if (rows.empty()) return make_ultrametric(1, {measure.q_star()}, measure);
    const std::size_t d = rows.size();
    std::vector<double> entries;
    for (const auto& row : rows) {
        if (!row.is_array() || row.size() != d)
            throw ConfigError("key 'simulate.overlaps' must be a square matrix");
        for (const auto& v : row) {
            if (!v.is_number()) throw ConfigError("key 'simulate.overlaps' must contain numbers");
            entries.push_back(v.get<double>());
        }
    }
    return make_ultrametric(d, std::move(entries), measure);
}

Json simulate_cmd(const RunConfig& cfg, std::ostream& log) {
    const auto m = model_of(cfg);
    const auto sol = solve_pde(m.mixture, m.measure, m.grid);
    const auto q = overlap_matrix(cfg, m.measure);
    auto checkpoints = number_list(cfg, "simulate", "checkpoints");
    if (checkpoints.empty()) checkpoints = default_checkpoints();
    const int steps = static_cast<int>(cfg.integer("simulate", "steps"));
    const auto stats = ensemble_checkpoints(sol, q, cfg.count("simulate", "paths"), steps, checkpoints,
                                            derive_seed(cfg.seed(), "simulate"), cfg.threads());
    const auto dir = out_dir(cfg);
    std::ostringstream csv;
    csv << "t,magnetization,magnetization_se,field,field_se,bracket,bracket_se,bracket_target\n";
    Json rows = Json::array();
    const double m0 = sol.ux(0.0, m.measure.h());
    double max_z = 0.0;
    for (const auto& c : stats) {
        csv << num(c.t) << ',' << num(c.magnetization.value) << ',' << num(c.magnetization.std_error) << ','
            << num(c.field.value) << ',' << num(c.field.std_error) << ',' << num(c.bracket.value) << ','
            << num(c.bracket.std_error) << ',' << num(c.bracket_target) << '\n';
        const double z = z_score(c.magnetization, {m0, 0.0});
        max_z = std::max(max_z, z);
        rows.push_back({{"t", c.t}, {"magnetization", estimate_json(c.magnetization)}, {"martingale_z", z}});
    }
    write_text(dir / "checkpoints.csv", csv.str());
    const std::size_t dump = cfg.count("simulate", "dump_paths");
    if (dump > 0) {
        std::ostringstream paths;
        paths << "bundle,replica,t,B,Y,X,M\n";
        for (std::size_t b = 0; b < dump; ++b) {
            const auto bundle = simulate_bundle(sol, q, steps, derive_seed(cfg.seed(), "simulate.dump", b));
            for (std::size_t i = 0; i < bundle.replicas(); ++i)
                for (std::size_t k = 0; k < bundle.times().size(); ++k)
                    paths << b << ',' << i << ',' << num(bundle.times()[k]) << ',' << num(bundle.B(i, k)) << ','
                          << num(bundle.Y(i, k)) << ',' << num(bundle.X(i, k)) << ',' << num(bundle.M(i, k))
                          << '\n';
        }
        write_text(dir / "paths.csv", paths.str());
    }
    Json r = header("simulate", cfg);
    r["results"] = {{"ux0", m0}, {"max_martingale_z", max_z}, {"checkpoints", rows}, {"csv", "checkpoints.csv"}};
    log << "simulate: " << stats.size() << " checkpoints, max martingale z " << num(max_z) << "\n";
    return r;
}

Json two_spin_cmd(const RunConfig& cfg, std::ostream& log) {
    const auto m = model_of(cfg);
    const auto sol = solve_pde(m.mixture, m.measure, m.grid);
    const auto res = two_spin(sol, moment_options(cfg));
    Json r = header("two-spin", cfg);
    r["results"] = {{"pde_tree", stat_json(res.pde)}, {"cascade_mc", stat_json(res.mc)},
                    {"closed_form", stat_json(res.mean)}};
    if (m.measure.size() == 1) r["results"]["q_rs"] = rs_fixed_point(m.mixture, m.measure.h());
    log << "two-spin: pde " << num(res.pde.value) << ", mc " << num(res.mc.value) << " +- "
        << num(res.mc.std_error) << ", mean " << num(res.mean.value) << "\n";
    return r;
}

Json three_spin_cmd(const RunConfig& cfg, std::ostream& log) {
    const auto m = model_of(cfg);
    const auto sol = solve_pde(m.mixture, m.measure, m.grid);
    const auto res = three_spin(sol, moment_options(cfg));
    Json r = header("three-spin", cfg);
    r["results"] = {{"closed_form", stat_json(res.closed)}, {"cascade_mc", stat_json(res.mc)},
                    {"z", z_score({res.closed.value, res.closed.std_error}, {res.mc.value, res.mc.std_error})}};
    log << "three-spin: closed " << num(res.closed.value) << ", mc " << num(res.mc.value) << " +- "
        << num(res.mc.std_error) << "\n";
    return r;
}

Json moment_cmd(const RunConfig& cfg, std::ostream& log) {
    const auto m = model_of(cfg);
    const auto sol = solve_pde(m.mixture, m.measure, m.grid);
    MomentQuery query;
    query.n_sites = cfg.count("moment", "n_sites");
    for (const auto& set : cfg.at("moment", "sets")) {
        if (!set.is_array()) throw ConfigError("key 'moment.sets' must be a list of site lists");
        std::vector<std::size_t> sites;
        for (const auto& s : set) {
            if (!s.is_number_integer() || s.get<long long>() < 1)
                throw ConfigError("key 'moment.sets' must contain positive site indices");
            sites.push_back(s.get<std::size_t>());
        }
        query.sets.push_back(std::move(sites));
    }
    query.validate();
    Json r = header("moment", cfg);
    const auto mc = moment_mc(sol, query, moment_options(cfg));
    r["results"] = {{"cascade_mc", stat_json(mc)}};
    const auto& tree = cfg.at("moment", "tree");
    if (!tree.empty()) {
        std::vector<std::pair<double, int>> spec;
        for (const auto& e : tree) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number_integer())
                throw ConfigError("key 'moment.tree' entries must be [time, power]");
            spec.emplace_back(e[0].get<double>(), e[1].get<int>());
        }
        StatResult t;
        t.value = tree_moment_pde(sol, spec);
        t.method = StatMethod::pde_tree;
        r["results"]["pde_tree"] = stat_json(t);
    }
    log << "moment: " << num(mc.value) << " +- " << num(mc.std_error) << "\n";
    return r;
}

std::optional<Expression> expression_of(const RunConfig& cfg, const std::string& key) {
    const auto s = cfg.string("gg", key);
    if (s.empty()) return std::nullopt;
    try {
        return Expression::parse(s);
    } catch (const ConfigError& e) {
        throw ConfigError("key 'gg." + key + "': " + e.what());
    }
}

Json check_json(const IdentityCheck& c) {
    Json j = {{"name", c.name},
              {"applicable", c.applicable},
              {"pass", c.pass},
              {"lhs", estimate_json(c.lhs)},
              {"rhs", estimate_json(c.rhs)},
              {"difference", estimate_json(c.difference)}};
    if (!std::isnan(c.rhs_exact)) j["rhs_exact"] = c.rhs_exact;
    if (!std::isnan(c.rhs_printed)) {
        j["rhs_printed"] = c.rhs_printed;
        j["printed_consistent"] = c.printed_consistent;
    }
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

Json gg_check_cmd(const RunConfig& cfg, std::ostream& log) {
    const auto measure = cfg.measure();
    GgFunctions fn;
    fn.f = expression_of(cfg, "f");
    fn.g = expression_of(cfg, "g");
    fn.n = cfg.count("gg", "n");
    fn.pair = expression_of(cfg, "pair");
    fn.triple = expression_of(cfg, "triple");
    GgOptions o;
    o.n_samples = cfg.count("gg", "n_samples");
    o.batches = cfg.count("gg", "batches");
    o.sampler = sampler_of(cfg, "gg");
    o.truncation = cfg.count("gg", "truncation");
    o.arrays_per_cascade = cfg.count("gg", "arrays_per_cascade");
    o.seed = derive_seed(cfg.seed(), "gg");
    o.threads = cfg.threads();
    const auto rep = gg_check(measure, fn, o);
    Json checks = Json::array();
    for (const auto& c : rep.checks) checks.push_back(check_json(c));
    Json r = header("gg-check", cfg);
    r["results"] = {{"n_samples", rep.n_samples}, {"pass", rep.pass()}, {"checks", checks}};
    if (o.sampler == OverlapSampler::cascade) r["results"]["max_tail_mass"] = rep.max_tail_mass;
    const std::size_t dump = cfg.count("gg", "dump_overlaps");
    if (dump > 0) {
        std::size_t n = 3;
        if (fn.f) n = std::max(n, (fn.n ? fn.n : fn.f->max_replica()) + 1);
        std::ostringstream csv;
        csv << "array,i,j,overlap\n";
        for (std::size_t a = 0; a < dump; ++a) {
            auto rng = make_rng(cfg.seed(), "gg.dump", a);
            const auto q = sample_overlap_array(measure, n, rng);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j)
                    csv << a << ',' << i + 1 << ',' << j + 1 << ',' << num(q(i, j)) << '\n';
        }
        write_text(out_dir(cfg) / "overlaps.csv", csv.str());
        r["results"]["csv"] = "overlaps.csv";
    }
    for (const auto& c : rep.checks)
        log << "gg-check: " << c.name << (c.applicable ? (c.pass ? " pass" : " FAIL") : " n/a") << "\n";
    return r;
}

Json tilt_check_cmd(const RunConfig& cfg, std::ostream& log) {
    const auto m = model_of(cfg);
    const auto levels = cole_hopf_levels(m.mixture, m.measure, default_field_grid(m.grid));
    TiltingOptions o;
    o.n_sites = cfg.count("tilt", "n_sites");
    o.n_samples = cfg.count("tilt", "n_samples");
    o.truncation = cfg.count("tilt", "truncation");
    o.batches = cfg.count("tilt", "batches");
    o.seed = derive_seed(cfg.seed(), "tilt.identity");
    o.threads = cfg.threads();
    const auto id = tilting_identity_check(m.mixture, m.measure, levels, o);
    const auto sol = solve_pde(m.mixture, m.measure, m.grid);
    const auto law = law_equivalence_check(sol, levels, cfg.count("tilt", "moment_samples"),
                                           static_cast<int>(cfg.integer("tilt", "steps")),
                                           derive_seed(cfg.seed(), "tilt.law"), cfg.threads());
    Json moments = Json::array();
    for (std::size_t k = 0; k < 4; ++k)
        moments.push_back({{"order", k + 1},
                           {"tilted", estimate_json(law.tilted[k])},
                           {"sde", estimate_json(law.sde[k])},
                           {"z", law.z[k]}});
    Json r = header("tilt-check", cfg);
    r["results"] = {{"identity",
                     {{"n_sites", id.n_sites},
                      {"n_samples", id.n_samples},
                      {"truncation", id.truncation},
                      {"reweighted", estimate_json(id.reweighted)},
                      {"tilted", estimate_json(id.tilted)},
                      {"z", id.z},
                      {"pass", id.pass},
                      {"max_tail_mass", id.max_tail_mass},
                      {"max_normalization_error", id.max_normalization_error}}},
                    {"law", {{"n_samples", law.n_samples}, {"moments", moments}, {"pass", law.pass}}}};
    log << "tilt-check: identity z " << num(id.z) << (id.pass ? " pass" : " FAIL") << ", law"
        << (law.pass ? " pass" : " FAIL") << "\n";
    return r;
}

std::vector<double> tap_scales(const RunConfig& cfg, const ParisiMeasure& measure) {
    auto qs = number_list(cfg, "tap", "q");
    if (qs.empty()) {
        qs = {0.0, measure.atoms().front().location, measure.q_star()};
        qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
    }
    return qs;
}

Json tap_check_cmd(const RunConfig& cfg, std::ostream& log) {
    const auto m = model_of(cfg);
    const auto sol = solve_pde(m.mixture, m.measure, m.grid);
    TapOptions o;
    o.n_clusters = cfg.count("tap", "n_clusters");
    o.n_branches = cfg.count("tap", "n_branches");
    o.steps = static_cast<int>(cfg.integer("tap", "steps"));
    o.threads = cfg.threads();
    std::ostringstream csv;
    csv << "q,X_q,s,s_se,y,y_se,residual,se,drift_gap,drift_gap_se\n";
    Json reports = Json::array();
    bool all = true;
    std::uint64_t index = 0;
    for (double q : tap_scales(cfg, m.measure)) {
        o.seed = derive_seed(cfg.seed(), "tap", index++);
        const auto rep = tap_check(sol, q, o);
        for (const auto& c : rep.clusters)
            csv << num(q) << ',' << num(c.x_q) << ',' << num(c.s.value) << ',' << num(c.s.std_error) << ','
                << num(c.y.value) << ',' << num(c.y.std_error) << ',' << num(c.residual) << ',' << num(c.se) << ','
                << num(c.drift_gap) << ',' << num(c.drift_gap_se) << '\n';
        all = all && rep.pass;
        reports.push_back({{"q", q},
                           {"onsager", rep.onsager},
                           {"n_clusters", rep.clusters.size()},
                           {"mean_residual", estimate_json(rep.mean_residual)},
                           {"chi2", rep.chi2},
                           {"chi2_limit", rep.chi2_limit},
                           {"within_3se", rep.within_3se},
                           {"mean_drift_gap", estimate_json(rep.mean_drift_gap)},
                           {"pass", rep.pass}});
        log << "tap-check: q = " << num(q) << " mean residual " << num(rep.mean_residual.value) << " +- "
            << num(rep.mean_residual.std_error) << (rep.pass ? " pass" : " FAIL") << "\n";
    }
    write_text(out_dir(cfg) / "tap.csv", csv.str());
    Json r = header("tap-check", cfg);
    r["results"] = {{"scales", reports}, {"pass", all}, {"csv", "tap.csv"}};
    return r;
}

Json covariance_json(const CovarianceReport& c) {
    return {{"overlap", c.overlap},
            {"covariance", estimate_json(c.covariance)},
            {"target", c.target},
            {"z", c.z},
            {"pass", c.pass}};
}

Json finite_n_cmd(const RunConfig& cfg, std::ostream& log) {
    const auto mix = cfg.mixture();
    const double h = cfg.number("model", "h");
    GibbsOptions o;
    o.sweeps = cfg.count("finite_n", "sweeps");
    o.burn_in = cfg.count("finite_n", "burn_in");
    o.n_chains = cfg.count("finite_n", "n_chains");
    o.n_disorder = cfg.count("finite_n", "n_disorder");
    o.histogram_bins = cfg.count("finite_n", "histogram_bins");
    o.seed = derive_seed(cfg.seed(), "finite_n.gibbs");
    o.threads = cfg.threads();
    const std::size_t N = cfg.count("finite_n", "N");
    const auto g = gibbs_sample(N, mix, h, o);
    std::ostringstream csv;
    csv << "lower,upper,density\n";
    for (std::size_t b = 0; b < g.histogram.size(); ++b)
        csv << num(g.histogram_edges[b]) << ',' << num(g.histogram_edges[b + 1]) << ',' << num(g.histogram[b])
            << '\n';
    write_text(out_dir(cfg) / "histogram.csv", csv.str());

    Json cov = Json::array();
    const auto covs = covariance_check(cfg.count("finite_n", "covariance_N"), mix,
                                       number_list(cfg, "finite_n", "covariance_overlaps"),
                                       cfg.count("finite_n", "covariance_redraws"),
                                       derive_seed(cfg.seed(), "finite_n.covariance"));
    bool cov_pass = true;
    for (const auto& c : covs) {
        cov.push_back(covariance_json(c));
        cov_pass = cov_pass && c.pass;
    }

    const auto degree = static_cast<int>(cfg.integer("finite_n", "decomposition_degree"));
    const MixtureSpec pure({{degree, cfg.number("finite_n", "decomposition_beta")}});
    const auto dec = decomposition_check(cfg.count("finite_n", "decomposition_N"), pure,
                                         cfg.count("finite_n", "decomposition_redraws"),
                                         derive_seed(cfg.seed(), "finite_n.decomposition"));
    Json cavity = Json::array();
    for (const auto& c : dec.cavity) cavity.push_back(covariance_json(c));

    Json r = header("finite-n", cfg);
    r["results"] = {
        {"gibbs",
         {{"N", g.N},
          {"overlap", estimate_json(g.overlap)},
          {"magnetization", estimate_json(g.magnetization)},
          {"first_spin", estimate_json(g.first_spin)},
          {"first_spin_pair", estimate_json(g.first_spin_pair)},
          {"max_rhat", g.max_rhat},
          {"rhat_warning", g.rhat_warning},
          {"max_energy_drift", g.max_energy_drift},
          {"csv", "histogram.csv"}}},
        {"covariance", {{"checks", cov}, {"pass", cov_pass}}},
        {"decomposition",
         {{"degree", dec.degree},
          {"N", dec.N},
          {"cavity", cavity},
          {"cavity_bias_bound", dec.cavity_bias_bound},
          {"remainder_variance", estimate_json(dec.remainder_variance)},
          {"remainder_target", dec.remainder_target},
          {"remainder_pass", dec.remainder_pass},
          {"exp_moment", estimate_json(dec.exp_moment)},
          {"pass", dec.pass}}}};
    // The replica-symmetric comparison only applies to a single-atom zeta.
    const auto meas = cfg.measure();
    if (meas.size() == 1) {
        const double q_rs = rs_fixed_point(mix, h);
        r["results"]["q_rs"] = q_rs;
        r["results"]["overlap_gap"] = std::abs(g.overlap.value - q_rs);
    }
    log << "finite-n: E<R12> = " << num(g.overlap.value) << " +- " << num(g.overlap.std_error)
        << ", covariance" << (cov_pass ? " pass" : " FAIL") << ", decomposition" << (dec.pass ? " pass" : " FAIL")
        << "\n";
    return r;
}

}  // namespace

Json run_command(const std::string& command, const RunConfig& cfg, std::ostream& log) {
    Json report;
    if (command == "solve-pde") report = solve_pde_cmd(cfg, log);
    else if (command == "simulate") report = simulate_cmd(cfg, log);
    else if (command == "two-spin") report = two_spin_cmd(cfg, log);
    else if (command == "three-spin") report = three_spin_cmd(cfg, log);
    else if (command == "moment") report = moment_cmd(cfg, log);
    else if (command == "gg-check") report = gg_check_cmd(cfg, log);
    else if (command == "tilt-check") report = tilt_check_cmd(cfg, log);
    else if (command == "tap-check") report = tap_check_cmd(cfg, log);
    else if (command == "finite-n") report = finite_n_cmd(cfg, log);
    else throw ConfigError("unknown subcommand '" + command + "'");
    write_text(out_dir(cfg) / (command + ".json"), report.dump(2) + "\n");
    return report;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"spinlab: numerical experiments for mean-field spin glasses"};
    app.set_version_flag("--version", std::string(SPINLAB_VERSION));
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_path;
    std::optional<unsigned> threads;
    std::vector<std::string> overrides;
    app.add_option("--config,-c", config_path, "configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "global seed");
    app.add_option("--out,-o", out_path, "output directory");
    app.add_option("--threads", threads, "worker threads");
    app.add_option("--set", overrides, "override section.key=value (repeatable)");

    std::string config_dir = default_config_dir();
    std::string work_dir;
    std::vector<int> only;
    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name);
        if (name == "selftest") {
            sub->add_option("--config-dir", config_dir, "bundled configuration directory");
            sub->add_option("--work-dir", work_dir, "scratch directory for the determinism check");
            sub->add_option("--only", only, "criteria to run")->delimiter(',');
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return static_cast<int>(ExitCode::config_error);
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        if (command == "selftest") {
            AcceptanceOptions o;
            o.config_dir = config_dir;
            o.work_dir = work_dir.empty() ? (fs::temp_directory_path() / "spinlab-selftest").string() : work_dir;
            if (seed) o.seed = *seed;
            if (threads) o.threads = *threads;
            o.only = only;
            const auto results = run_acceptance(o, out);
            const bool ok = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.pass; });
            return static_cast<int>(ok ? ExitCode::ok : ExitCode::acceptance_failure);
        }
        RunConfig cfg;
        if (!config_path.empty()) cfg.merge_file(config_path);
        for (const auto& o : overrides) cfg.apply_override(o);
        if (seed) cfg.set_seed(*seed);
        if (out_path) cfg.apply_override("run.out=" + Json(*out_path).dump());
        if (threads) cfg.apply_override("run.threads=" + std::to_string(*threads));
        run_command(command, cfg, out);
        return static_cast<int>(ExitCode::ok);
    } catch (const NumericalError& e) {
        err << "spinlab: numerical failure: " << e.what() << "\n";
        return static_cast<int>(ExitCode::numerical_failure);
    } catch (const ConfigError& e) {
        err << "spinlab: configuration error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::config_error);
    } catch (const fs::filesystem_error& e) {
        err << "spinlab: configuration error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::config_error);
    }
}

}  // namespace spinlab
