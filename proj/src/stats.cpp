#include "spinlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "spinlab/diffusion.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/quadrature.hpp"
#include "spinlab/ultrametric.hpp"

namespace spinlab {

void MomentQuery::validate() const {
    if (sets.empty()) throw ConfigError("moment: at least one replica set is required");
    if (n_sites == 0) throw ConfigError("moment: n_sites must be positive");
    for (std::size_t l = 0; l < sets.size(); ++l) {
        if (sets[l].empty()) {
            std::ostringstream os;
            os << "moment: site set of replica " << l + 1 << " is empty";
            throw ConfigError(os.str());
        }
        for (std::size_t i : sets[l])
            if (i == 0 || i > n_sites) {
                std::ostringstream os;
                os << "moment: site " << i << " of replica " << l + 1 << " outside 1.." << n_sites;
                throw ConfigError(os.str());
            }
    }
}

const char* to_string(StatMethod m) {
    switch (m) {
        case StatMethod::cascade_mc: return "cascade-mc";
        case StatMethod::pde_tree: return "pde-tree";
        case StatMethod::closed_form: return "closed-form";
    }
    return "";
}

StatResult moment_mc(const PdeSolution& sol, const MomentQuery& query, const MomentOptions& opt) {
    query.validate();
    if (opt.batches < 2 || opt.n_outer < opt.batches) throw ConfigError("moment: need n_outer >= batches >= 2");
    if (opt.n_paths == 0) throw ConfigError("moment: n_paths must be positive");
    const auto& measure = sol.measure();
    const std::size_t R = query.replicas(), S = query.n_sites, d = R * S;
    const std::size_t n_outer = opt.n_outer, paths = n_outer * opt.n_paths;

    // Overlap matrices: replicas of one site follow the sampled matrix, sites are independent.
    ClusterPlan plan(level_knots(measure), d);
    double tail = 0.0;
    auto add = [&](const UltrametricMatrix& q) {
        UltrametricMatrix big(d, std::vector<double>(d * d, 0.0));
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < R; ++a)
                for (std::size_t b = 0; b < R; ++b) big(s * R + a, s * R + b) = q(a, b);
        for (std::size_t p = 0; p < opt.n_paths; ++p) plan.add(big);
    };
    if (opt.sampler == OverlapSampler::exact) {
        Rng rng = make_rng(opt.seed, "moment-overlaps");
        for (std::size_t o = 0; o < n_outer; ++o) add(sample_overlap_array(measure, R, rng));
    } else {
        const std::size_t per = std::max<std::size_t>(1, opt.arrays_per_cascade);
        for (std::size_t o = 0, c = 0; o < n_outer; ++c) {
            const auto cascade = sample_cascade(measure, opt.truncation, derive_seed(opt.seed, "moment-cascade", c));
            for (double t : cascade.tail_mass()) tail = std::max(tail, t);
            Rng rng = make_rng(opt.seed, "moment-leaves", c);
            for (std::size_t i = 0; i < per && o < n_outer; ++i, ++o)
                add(overlaps_of(cascade, sample_leaves(cascade, R, rng)));
        }
    }

    const TimeGrid grid = make_time_grid(measure, opt.steps);
    PathEngine engine(sol, grid);
    Ensemble ens(paths, d, measure.h());
    engine.advance(ens, plan, 0, grid.index_of(measure.q_star()), opt.seed, "moment-paths", {}, {}, opt.threads);

    std::vector<double> batch_sum(opt.batches, 0.0), batch_count(opt.batches, 0.0);
    for (std::size_t o = 0; o < n_outer; ++o) {
        double v = 0.0;
        for (std::size_t p = o * opt.n_paths; p < (o + 1) * opt.n_paths; ++p) {
            double prod = 1.0;
            for (std::size_t l = 0; l < R; ++l)
                for (std::size_t site : query.sets[l]) prod *= std::tanh(ens.X[ens.at(p, (site - 1) * R + l)]);
            v += prod;
        }
        const std::size_t b = o * opt.batches / n_outer;
        batch_sum[b] += v / static_cast<double>(opt.n_paths);
        batch_count[b] += 1.0;
    }
    std::vector<double> means(opt.batches);
    for (std::size_t b = 0; b < opt.batches; ++b) means[b] = batch_sum[b] / batch_count[b];
    const Estimate e = batch_means(means);
    StatResult r;
    r.value = e.value;
    r.std_error = e.std_error;
    r.method = StatMethod::cascade_mc;
    r.diagnostics["n_outer"] = static_cast<double>(n_outer);
    r.diagnostics["n_paths"] = static_cast<double>(opt.n_paths);
    r.diagnostics["steps"] = static_cast<double>(opt.steps);
    if (opt.sampler == OverlapSampler::cascade) r.diagnostics["max_tail_mass"] = tail;
    return r;
}

double tree_moment_pde(const PdeSolution& sol, const std::vector<std::pair<double, int>>& spec) {
    if (spec.empty()) throw ConfigError("tree moment: empty specification");
    const auto& measure = sol.measure();
    const auto& mixture = sol.mixture();
    for (std::size_t j = 0; j < spec.size(); ++j) {
        if (!(spec[j].first >= 0.0 && spec[j].first <= measure.q_star() + 1e-15))
            throw DomainError("tree moment: times must lie in [0, q_*]");
        if (spec[j].second < 1) throw DomainError("tree moment: powers must be at least 1");
        if (j > 0 && !(spec[j].first > spec[j - 1].first))
            throw DomainError("tree moment: times must be strictly increasing");
    }
    const std::size_t n = sol.nx();
    const double dx = sol.grid().dx();
    const double dt_max = sol.grid().dt_max;
    auto ux_row = [&](double t, std::vector<double>& out) {
        const TimeSlice sl = sol.locate(t);
        const auto a = sol.ux_slice(sl.lower), b = sol.ux_slice(sl.upper);
        out.resize(n);
        for (std::size_t j = 0; j < n; ++j) out[j] = (1.0 - sl.weight) * a[j] + sl.weight * b[j];
    };
    auto multiply = [&](std::vector<double>& w, double t, int k) {
        std::vector<double> g;
        ux_row(t, g);
        for (std::size_t j = 0; j < n; ++j) w[j] *= std::pow(g[j], k);
    };

    std::vector<double> w(n, 1.0);
    multiply(w, spec.back().first, spec.back().second);
    // Breakpoints: stored slice times below the last spec time plus the spec times.
    std::vector<double> stops;
    for (double t : sol.times())
        if (t < spec.back().first) stops.push_back(t);
    for (const auto& p : spec) stops.push_back(p.first);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    std::vector<double> lower(n), diag(n), upper(n), rhs(n), scratch, coef;
    std::size_t next_spec = spec.size() - 1;  // spec.back() already applied
    for (std::size_t k = stops.size() - 1; k-- > 0;) {
        const double ta = stops[k], tb = stops[k + 1];
        const double span_s = mixture.xi_prime(tb) - mixture.xi_prime(ta);
        const double m = measure.cdf(ta);
        if (span_s > 0.0) {
            const auto steps = static_cast<std::size_t>(std::ceil(span_s / dt_max - 1e-12));
            const double ds = span_s / static_cast<double>(steps);
            const double r = ds / (dx * dx);
            for (std::size_t step = 0; step < steps; ++step) {
                // Implicit step to the lower end of the sub-interval.
                const double frac = static_cast<double>(steps - step - 1) / static_cast<double>(steps);
                ux_row(ta + (tb - ta) * frac, coef);
                for (std::size_t j = 0; j < n; ++j) {
                    const double a = m * coef[j] * ds / (2.0 * dx);
                    lower[j] = -0.5 * r + a;
                    diag[j] = 1.0 + r;
                    upper[j] = -0.5 * r - a;
                    rhs[j] = w[j];
                }
                // Zero-flux ghost points at +-L.
                upper[0] = -r;
                lower[n - 1] = -r;
                solve_tridiagonal(lower, diag, upper, rhs, scratch);
                w.swap(rhs);
            }
        }
        while (next_spec > 0 && spec[next_spec - 1].first == ta) {
            --next_spec;
            multiply(w, ta, spec[next_spec].second);
        }
    }
    // Value at (0, h).
    const double L = sol.grid().x_halfwidth, h = measure.h();
    if (!(std::abs(h) <= L)) throw DomainError("tree moment: h outside the grid");
    const double pos = (h + L) / dx;
    std::size_t j = std::min(static_cast<std::size_t>(pos), n - 2);
    const double fr = pos - static_cast<double>(j);
    return (1.0 - fr) * w[j] + fr * w[j + 1];
}

TwoSpinResult two_spin(const PdeSolution& sol, const MomentOptions& opt) {
    const auto& measure = sol.measure();
    TwoSpinResult out;
    out.pde.method = StatMethod::pde_tree;
    out.mean.method = StatMethod::closed_form;
    double max_residual = 0.0;
    for (std::size_t k = 0; k < measure.size(); ++k) {
        const auto& a = measure.atoms()[k];
        const double e2 = tree_moment_pde(sol, {{a.location, 2}});
        out.pde.value += a.mass * e2;
        out.mean.value += a.mass * a.location;
        const double res = std::abs(e2 - a.location);
        max_residual = std::max(max_residual, res);
        std::ostringstream key;
        key << "residual_atom_" << k + 1;
        out.mean.diagnostics[key.str()] = res;
    }
    out.mean.diagnostics["max_residual"] = max_residual;
    out.mean.applicable = max_residual <= 1e-2;
    MomentQuery q;
    q.n_sites = 1;
    q.sets = {{1}, {1}};
    out.mc = moment_mc(sol, q, opt);
    return out;
}

double three_spin_closed_form(const ParisiMeasure& measure, const std::function<double(std::size_t, std::size_t)>& F,
                              double* printed) {
    const auto atoms = measure.atoms();
    const std::size_t r = atoms.size();
    double value = 0.0, print = 0.0;
    for (std::size_t a = 0; a < r; ++a) {
        double above = 0.0;
        for (std::size_t x = a + 1; x < r; ++x) above += atoms[x].mass;
        const double mu = atoms[a].mass;
        const double faa = F(a, a);
        // P(R12 = R13 = R23 = q_a) under the Ghirlanda–Guerra law.
        value += faa * 0.5 * mu * (mu + 1.0 - above);
        print += 0.75 * mu * mu * faa;
        for (std::size_t y = 0; y < a; ++y) {
            const double fxy = F(a, y);
            value += 1.5 * mu * atoms[y].mass * fxy;
            print += 1.5 * mu * atoms[y].mass * fxy;
        }
    }
    if (printed) *printed = print;
    return value;
}

ThreeSpinResult three_spin(const PdeSolution& sol, const MomentOptions& opt) {
    const auto& measure = sol.measure();
    const auto atoms = measure.atoms();
    ThreeSpinResult out;
    out.closed.method = StatMethod::closed_form;
    double printed = 0.0;
    out.closed.value = three_spin_closed_form(
        measure,
        [&](std::size_t x, std::size_t y) {
            if (x == y) return tree_moment_pde(sol, {{atoms[x].location, 3}});
            return tree_moment_pde(sol, {{atoms[y].location, 1}, {atoms[x].location, 2}});
        },
        &printed);
    out.closed.diagnostics["printed_form"] = printed;
    MomentQuery q;
    q.n_sites = 1;
    q.sets = {{1}, {1}, {1}};
    out.mc = moment_mc(sol, q, opt);
    return out;
}

std::vector<StateSample> state_sample(double f, double v, std::size_t n, std::uint64_t seed) {
    if (v < 0.0) throw DomainError("state sample: negative variance");
    Rng rng = make_rng(seed, "state");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double p_plus = 0.5 * (1.0 + std::tanh(f));
    const double sd = std::sqrt(v);
    std::vector<StateSample> out(n);
    for (auto& s : out) {
        s.s = unif(rng) < p_plus ? 1 : -1;
        s.y = v == 0.0 ? f : f + s.s * v + sd * normal(rng);
    }
    return out;
}

std::vector<StateSample> state_sample(double f, const PdeSolution& sol, std::size_t n, std::uint64_t seed) {
    const auto& mix = sol.mixture();
    return state_sample(f, mix.xi_prime(1.0) - mix.xi_prime(sol.measure().q_star()), n, seed);
}

double rs_fixed_point(const MixtureSpec& mixture, double h, double tol) {
    const GaussHermite rule(200);
    auto map = [&](double q) {
        const double sd = std::sqrt(mixture.xi_prime(q));
        return rule.integrate([&](double z) {
            const double t = std::tanh(h + sd * z);
            return t * t;
        });
    };
    // The map is increasing in q; iterating from q = 1 descends to the largest fixed point.
    double q = 1.0;
    for (int it = 0; it < 100000; ++it) {
        const double next = map(q);
        if (std::abs(next - q) <= tol) return next;
        q = next;
    }
    throw NumericalError("rs fixed point: iteration did not converge");
}

}  // namespace spinlab
