#include "spinlab/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "spinlab/errors.hpp"
#include "spinlab/stats.hpp"

namespace spinlab {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Removes a trailing comment outside string literals.
std::string strip_comment(const std::string& s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
        if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
}

int bracket_balance(const std::string& s) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
        if (in_string) continue;
        if (s[i] == '[' || s[i] == '{') ++depth;
        if (s[i] == ']' || s[i] == '}') --depth;
    }
    return depth;
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    return true;
}

[[noreturn]] void fail_at(const std::string& origin, int line, const std::string& what) {
    std::ostringstream os;
    os << origin << ":" << line << ": " << what;
    throw ConfigError(os.str());
}

const char* type_name(const Json& v) {
    if (v.is_boolean()) return "boolean";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    if (v.is_object()) return "table";
    return "null";
}

bool compatible(const Json& want, const Json& got) {
    if (want.is_null()) return true;
    if (want.is_number()) return got.is_number();
    if (want.is_array()) return got.is_array();
    if (want.is_string()) return got.is_string();
    if (want.is_boolean()) return got.is_boolean();
    return false;
}

Json defaults() {
    return Json::parse(R"({
  "run": {"seed": 1, "threads": 1, "out": "spinlab-out"},
  "model": {"mixture": [[2, 0.5]], "h": 0.3},
  "zeta": {"atoms": [[0.3, 0.5], [0.7, 0.5]], "replica_symmetric": false},
  "grid": {"x_halfwidth": 0, "dx": 0.01, "dt_max": 1e-4, "n_slices": 1000, "plateau_tolerance": 1e-4,
           "format": "csv"},
  "simulate": {"paths": 100000, "steps": 4000, "overlaps": [], "checkpoints": [], "dump_paths": 0},
  "moment": {"sets": [[1], [1]], "n_sites": 1, "n_outer": 20000, "n_paths": 1, "steps": 4000, "batches": 30,
             "sampler": "exact", "truncation": 200, "arrays_per_cascade": 50, "tree": []},
  "gg": {"n_samples": 100000, "batches": 30, "sampler": "exact", "truncation": 200, "arrays_per_cascade": 100,
         "f": "R12", "g": "x", "n": 0, "pair": "x * y", "triple": "(x - y)^2 + (x - z)^2 + (y - z)^2",
         "dump_overlaps": 0},
  "tilt": {"n_sites": 1, "n_samples": 20000, "truncation": 200, "batches": 30, "moment_samples": 100000,
           "steps": 4000},
  "tap": {"q": [], "n_clusters": 50, "n_branches": 1000, "steps": 4000},
  "finite_n": {"N": 128, "sweeps": 2000, "burn_in": 0, "n_chains": 8, "n_disorder": 4, "histogram_bins": 41,
               "covariance_N": 32, "covariance_redraws": 10000, "covariance_overlaps": [1.0, 0.5, 0.0],
               "decomposition_N": 32, "decomposition_redraws": 10000, "decomposition_degree": 3,
               "decomposition_beta": 1.0}
})");
}

}  // namespace

Json parse_config_text(const std::string& text, const std::string& origin, std::map<std::string, int>* lines) {
    Json out = Json::object();
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[' && line.find('=') == std::string::npos) {
            if (line.back() != ']') fail_at(origin, lineno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_name(section)) fail_at(origin, lineno, "invalid section name '" + section + "'");
            if (out.contains(section)) fail_at(origin, lineno, "duplicate section [" + section + "]");
            out[section] = Json::object();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail_at(origin, lineno, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (!valid_name(key)) fail_at(origin, lineno, "invalid key '" + key + "'");
        std::string value = trim(line.substr(eq + 1));
        const int start = lineno;
        while (bracket_balance(value) > 0 && std::getline(in, raw)) {
            ++lineno;
            value += " " + trim(strip_comment(raw));
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (bracket_balance(value) != 0) fail_at(origin, start, "unbalanced brackets in value of '" + full + "'");
        if (value.empty()) fail_at(origin, start, "missing value for '" + full + "'");
        Json v;
        try {
            v = Json::parse(value);
        } catch (const nlohmann::json::parse_error&) {
            fail_at(origin, start, "cannot parse value of '" + full + "': " + value);
        }
        Json& target = section.empty() ? out : out[section];
        if (target.contains(key)) fail_at(origin, start, "duplicate key '" + full + "'");
        target[key] = v;
        if (lines) (*lines)[full] = start;
    }
    return out;
}

RunConfig::RunConfig() : data_(defaults()) {}

void RunConfig::set_value(const std::string& section, const std::string& key, const Json& value,
                          const std::string& where) {
    if (!data_.contains(section)) throw ConfigError(where + ": unknown section [" + section + "]");
    Json& sec = data_[section];
    if (!sec.contains(key)) throw ConfigError(where + ": unknown key '" + section + "." + key + "'");
    if (!compatible(sec[key], value))
        throw ConfigError(where + ": key '" + section + "." + key + "' expects a " + type_name(sec[key]) + ", got a " +
                          type_name(value));
    sec[key] = value;
}

void RunConfig::merge_text(const std::string& text, const std::string& origin) {
    std::map<std::string, int> lines;
    const Json parsed = parse_config_text(text, origin, &lines);
    for (const auto& [name, value] : parsed.items()) {
        if (!value.is_object()) {
            std::ostringstream os;
            os << origin << ":" << lines[name] << ": key '" << name << "' must be inside a section";
            throw ConfigError(os.str());
        }
        for (const auto& [key, v] : value.items()) {
            std::ostringstream where;
            where << origin << ":" << lines[name + "." + key];
            set_value(name, key, v, where.str());
        }
    }
}

void RunConfig::merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str(), path);
}

void RunConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ConfigError("override '" + assignment + "': expected section.key=value");
    const std::string section = trim(assignment.substr(0, dot));
    const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
    const std::string text = trim(assignment.substr(eq + 1));
    Json v;
    try {
        v = Json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        v = text;
    }
    set_value(section, key, v, "override '" + assignment + "'");
}

void RunConfig::set_seed(std::uint64_t seed) { data_["run"]["seed"] = seed; }

const Json& RunConfig::at(const std::string& section, const std::string& key) const {
    return data_.at(section).at(key);
}

double RunConfig::number(const std::string& section, const std::string& key) const {
    return at(section, key).get<double>();
}

std::int64_t RunConfig::integer(const std::string& section, const std::string& key) const {
    const Json& v = at(section, key);
    const double d = v.get<double>();
    if (d != std::floor(d)) throw ConfigError("key '" + section + "." + key + "' must be an integer");
    return static_cast<std::int64_t>(d);
}

std::size_t RunConfig::count(const std::string& section, const std::string& key) const {
    const auto v = integer(section, key);
    if (v < 0) throw ConfigError("key '" + section + "." + key + "' must be nonnegative");
    return static_cast<std::size_t>(v);
}

std::string RunConfig::string(const std::string& section, const std::string& key) const {
    return at(section, key).get<std::string>();
}

bool RunConfig::boolean(const std::string& section, const std::string& key) const {
    const Json& v = at(section, key);
    return v.is_boolean() ? v.get<bool>() : v.get<double>() != 0.0;
}

std::uint64_t RunConfig::seed() const {
    const Json& v = at("run", "seed");
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError("key 'run.seed' must be a nonnegative 64-bit integer");
}

unsigned RunConfig::threads() const {
    const auto t = count("run", "threads");
    if (t < 1 || t > 256) throw ConfigError("key 'run.threads' must lie in 1..256");
    return static_cast<unsigned>(t);
}

MixtureSpec RunConfig::mixture() const {
    std::vector<MixtureTerm> terms;
    const Json& m = at("model", "mixture");
    for (const auto& t : m) {
        if (!t.is_array() || t.size() != 2 || !t[0].is_number_integer() || !t[1].is_number())
            throw ConfigError("key 'model.mixture' must be a list of [degree, beta] pairs");
        terms.push_back({t[0].get<int>(), t[1].get<double>()});
    }
    try {
        return MixtureSpec(std::move(terms));
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("key 'model.mixture': ") + e.what());
    }
}

ParisiMeasure RunConfig::measure() const {
    const double h = number("model", "h");
    if (boolean("zeta", "replica_symmetric")) {
        const double q = rs_fixed_point(mixture(), h);
        return ParisiMeasure({{q, 1.0}}, h);
    }
    std::vector<Atom> atoms;
    for (const auto& a : at("zeta", "atoms")) {
        if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
            throw ConfigError("key 'zeta.atoms' must be a list of [location, mass] pairs");
        atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    try {
        return ParisiMeasure(std::move(atoms), h);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("key 'zeta.atoms': ") + e.what());
    }
}

PdeGrid RunConfig::grid(const MixtureSpec& mixture, const ParisiMeasure& measure) const {
    PdeGrid g = default_grid(mixture, measure);
    const double L = number("grid", "x_halfwidth");
    const double dx = number("grid", "dx");
    if (L < 0.0) throw ConfigError("key 'grid.x_halfwidth' must be nonnegative (0 selects the default)");
    if (!(dx > 0.0)) throw ConfigError("key 'grid.dx' must be positive");
    if (L > 0.0) g.x_halfwidth = L;
    auto cells = static_cast<int>(std::ceil(2.0 * g.x_halfwidth / dx - 1e-9));
    if (cells % 2) ++cells;
    g.nx = cells + 1;
    g.dt_max = number("grid", "dt_max");
    g.n_slices = static_cast<int>(integer("grid", "n_slices"));
    g.plateau_tolerance = number("grid", "plateau_tolerance");
    validate_grid(g, measure);
    return g;
}

Json RunConfig::resolved() const {
    Json out = data_;
    const auto mix = mixture();
    const auto meas = measure();
    Json atoms = Json::array();
    for (const auto& a : meas.atoms()) atoms.push_back({a.location, a.mass});
    out["zeta"]["resolved_atoms"] = atoms;
    const auto g = grid(mix, meas);
    out["grid"]["resolved"] = {{"x_halfwidth", g.x_halfwidth}, {"nx", g.nx}, {"dt_max", g.dt_max},
                               {"n_slices", g.n_slices}};
    return out;
}

}  // namespace spinlab
