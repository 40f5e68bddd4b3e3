#include "spinlab/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "spinlab/errors.hpp"
#include "spinlab/parallel.hpp"

namespace spinlab {

namespace {

constexpr double kSnap = 1e-12;

}  // namespace

std::size_t TimeGrid::index_of(double t) const {
    const auto it = std::lower_bound(times.begin(), times.end(), t - kSnap);
    if (it == times.end() || std::abs(*it - t) > kSnap) {
        std::ostringstream os;
        os << "time " << t << " is not a point of the simulation grid";
        throw ConfigError(os.str());
    }
    return static_cast<std::size_t>(it - times.begin());
}

TimeGrid make_time_grid(const ParisiMeasure& measure, int steps_per_unit, std::span<const double> extra_times) {
    if (steps_per_unit < kMinStepsPerUnit) {
        std::ostringstream os;
        os << "simulation: steps = " << steps_per_unit << " is below the minimum " << kMinStepsPerUnit;
        throw ConfigError(os.str());
    }
    std::vector<double> special{0.0, 1.0};
    for (const auto& a : measure.atoms()) special.push_back(a.location);
    for (double t : extra_times) {
        if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("simulation: requested time outside [0, 1]");
        special.push_back(t);
    }
    std::sort(special.begin(), special.end());
    special.erase(std::unique(special.begin(), special.end()), special.end());

    const double dt = 1.0 / steps_per_unit;
    std::vector<double> t;
    for (int k = 0; k <= steps_per_unit; ++k) t.push_back(k * dt);
    const double fine = dt / 4.0;
    for (const auto& a : measure.atoms())
        for (int k = -40; k <= 40; ++k) {
            const double s = a.location + k * fine;
            if (s > 0.0 && s < 1.0) t.push_back(s);
        }
    std::sort(t.begin(), t.end());
    // Drop generic points too close to a special time, then insert the specials exactly.
    std::vector<double> out;
    out.reserve(t.size() + special.size());
    for (double s : t) {
        const auto it = std::lower_bound(special.begin(), special.end(), s);
        const bool near_hi = it != special.end() && *it - s < fine * 0.25;
        const bool near_lo = it != special.begin() && s - *(it - 1) < fine * 0.25;
        if (!near_hi && !near_lo) out.push_back(s);
    }
    out.insert(out.end(), special.begin(), special.end());
    std::sort(out.begin(), out.end());
    std::vector<double> merged;
    for (double s : out)
        if (merged.empty() || s - merged.back() > kSnap) merged.push_back(s);
    return TimeGrid{std::move(merged)};
}

ClusterPlan::ClusterPlan(std::vector<double> knots, std::size_t replicas)
    : knots_(std::move(knots)), d_(replicas) {
    if (knots_.empty() || knots_.front() != 0.0) throw ConfigError("cluster plan: knots must start at 0");
    if (d_ == 0) throw ConfigError("cluster plan: at least one replica is required");
}

std::size_t ClusterPlan::segment(double t) const {
    return static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), t + kSnap) - knots_.begin()) - 1;
}

void ClusterPlan::add(const UltrametricMatrix& q) {
    if (q.size() != d_) throw ConfigError("cluster plan: overlap matrix has the wrong size");
    for (std::size_t s = 0; s < knots_.size(); ++s)
        for (std::size_t i = 0; i < d_; ++i) {
            std::uint32_t label = static_cast<std::uint32_t>(i);
            for (std::size_t j = 0; j < i; ++j)
                if (q(i, j) > knots_[s] + kSnap) {
                    label = static_cast<std::uint32_t>(j);
                    break;
                }
            labels_.push_back(label);
        }
    ++paths_;
}

void ClusterPlan::add_independent(std::size_t count) {
    for (std::size_t p = 0; p < count; ++p)
        for (std::size_t s = 0; s < knots_.size(); ++s)
            for (std::size_t i = 0; i < d_; ++i) labels_.push_back(static_cast<std::uint32_t>(i));
    paths_ += count;
}

Ensemble::Ensemble(std::size_t paths, std::size_t replicas, double h)
    : n(paths), d(replicas), B(paths * replicas, 0.0), Y(paths * replicas, h), X(paths * replicas, h) {}

PathEngine::PathEngine(const PdeSolution& sol, TimeGrid grid) : sol_(&sol), grid_(std::move(grid)) {
    const auto& t = grid_.times;
    if (t.size() < 2 || t.front() != 0.0 || t.back() != 1.0) throw ConfigError("simulation grid must span [0, 1]");
    const auto& mix = sol.mixture();
    const auto& meas = sol.measure();
    const ClusterPlan segments(level_knots(meas), 1);
    steps_.resize(t.size() - 1);
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double dxi = mix.xi_prime(t[k + 1]) - mix.xi_prime(t[k]);
        Step& s = steps_[k];
        s.sd = std::sqrt(std::max(0.0, dxi));
        s.sd_b = std::sqrt(t[k + 1] - t[k]);
        s.drift = meas.cdf(t[k]) * dxi;
        s.slice = sol.locate(t[k]);
        s.segment = segments.segment(t[k]);
    }
}

void PathEngine::advance(Ensemble& ens, const ClusterPlan& plan, std::size_t k0, std::size_t k1, std::uint64_t seed,
                         std::string_view label, const std::vector<char>& observe, const Observer& observer,
                         unsigned threads) const {
    if (plan.paths() != ens.n || plan.replicas() != ens.d) throw ConfigError("simulation: plan and ensemble disagree");
    if (k0 > k1 || k1 >= grid_.size()) throw ConfigError("simulation: step range outside the grid");
    if (plan.knots() != level_knots(sol_->measure())) throw ConfigError("simulation: plan knots differ from the measure");
    const std::size_t d = ens.d;
    const std::size_t blocks = (ens.n + block_size - 1) / block_size;
    auto watch = [&](std::size_t k) { return observer && k < observe.size() && observe[k]; };
    parallel_for(blocks, threads, [&](std::size_t b) {
        const std::size_t p0 = b * block_size, p1 = std::min(ens.n, p0 + block_size);
        Rng rng = make_rng(seed, label, b);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> z(d);
        if (watch(k0)) observer(k0, p0, p1);
        for (std::size_t k = k0; k < k1; ++k) {
            const Step& s = steps_[k];
            for (std::size_t p = p0; p < p1; ++p) {
                const std::uint32_t* lab = plan.labels(p, s.segment);
                for (std::size_t i = 0; i < d; ++i) z[i] = lab[i] == i ? normal(rng) : z[lab[i]];
                const std::size_t base = p * d;
                for (std::size_t i = 0; i < d; ++i) {
                    double& x = ens.X[base + i];
                    const double ux = s.drift != 0.0 ? sol_->ux(s.slice, x) : 0.0;
                    x += s.drift * ux + s.sd * z[i];
                    ens.Y[base + i] += s.sd * z[i];
                    ens.B[base + i] += s.sd_b * z[i];
                }
            }
            if (watch(k + 1)) observer(k + 1, p0, p1);
        }
    });
}

PathBundle simulate_bundle(const PdeSolution& sol, const UltrametricMatrix& q, int steps, std::uint64_t seed) {
    const auto verdict = validate_ultrametric(q, sol.measure());
    if (!verdict.valid) throw ConfigError("simulate: overlap matrix invalid: " + verdict.message);
    std::vector<double> extra(q.entries().begin(), q.entries().end());
    PathEngine engine(sol, make_time_grid(sol.measure(), steps, extra));
    const std::size_t d = q.size(), nt = engine.grid().size();
    ClusterPlan plan(level_knots(sol.measure()), d);
    plan.add(q);
    Ensemble ens(1, d, sol.measure().h());

    PathBundle out;
    out.q_ = q;
    out.times_ = engine.grid().times;
    out.seed_ = seed;
    out.b_.resize(d * nt);
    out.y_.resize(d * nt);
    out.x_.resize(d * nt);
    out.m_.resize(d * nt);
    std::vector<char> all(nt, 1);
    engine.advance(ens, plan, 0, nt - 1, seed, "bundle", all, [&](std::size_t k, std::size_t, std::size_t) {
        const TimeSlice slice = sol.locate(out.times_[k]);
        for (std::size_t i = 0; i < d; ++i) {
            out.b_[i * nt + k] = ens.B[i];
            out.y_[i * nt + k] = ens.Y[i];
            out.x_[i * nt + k] = ens.X[i];
            out.m_[i * nt + k] = sol.ux(slice, ens.X[i]);
        }
    });
    return out;
}

std::vector<double> empirical_bracket(const PathBundle& bundle, std::size_t i, std::size_t j) {
    if (i == j) throw ConfigError("bracket: replicas must differ");
    if (i >= bundle.replicas() || j >= bundle.replicas()) throw ConfigError("bracket: replica index out of range");
    const std::size_t nt = bundle.times().size();
    std::vector<double> out(nt, 0.0);
    for (std::size_t k = 1; k < nt; ++k)
        out[k] = out[k - 1] + (bundle.Y(i, k) - bundle.Y(i, k - 1)) * (bundle.Y(j, k) - bundle.Y(j, k - 1));
    return out;
}

double Continuations::mean_y() const {
    double s = 0.0;
    for (double v : x1) s += v;
    return x1.empty() ? 0.0 : s / static_cast<double>(x1.size());
}

double Continuations::mean_s() const {
    double s = 0.0;
    for (double v : tanh_x1) s += v;
    return tanh_x1.empty() ? 0.0 : s / static_cast<double>(tanh_x1.size());
}

Continuations conditional_continuation(const PdeSolution& sol, const PathBundle& bundle, std::size_t i, double q,
                                       std::size_t n_branches, std::uint64_t seed) {
    if (i >= bundle.replicas()) throw ConfigError("continuation: replica index out of range");
    if (n_branches == 0) throw ConfigError("continuation: need at least one branch");
    TimeGrid grid{bundle.times()};
    const std::size_t k0 = grid.index_of(q);
    PathEngine engine(sol, grid);
    ClusterPlan plan(level_knots(sol.measure()), 1);
    plan.add_independent(n_branches);
    Ensemble ens(n_branches, 1, 0.0);
    std::fill(ens.B.begin(), ens.B.end(), bundle.B(i, k0));
    std::fill(ens.Y.begin(), ens.Y.end(), bundle.Y(i, k0));
    std::fill(ens.X.begin(), ens.X.end(), bundle.X(i, k0));
    engine.advance(ens, plan, k0, grid.size() - 1, seed, "continuation");
    Continuations out;
    out.x1 = ens.X;
    out.tanh_x1.resize(n_branches);
    for (std::size_t p = 0; p < n_branches; ++p) out.tanh_x1[p] = std::tanh(ens.X[p]);
    return out;
}

std::vector<double> default_checkpoints() {
    std::vector<double> c;
    for (int k = 1; k <= 10; ++k) c.push_back(0.1 * k);
    c.back() = 1.0;
    return c;
}

std::vector<CheckpointStats> ensemble_checkpoints(const PdeSolution& sol, const UltrametricMatrix& q,
                                                  std::size_t n_paths, int steps,
                                                  std::span<const double> checkpoints, std::uint64_t seed,
                                                  unsigned threads) {
    const auto verdict = validate_ultrametric(q, sol.measure());
    if (!verdict.valid) throw ConfigError("simulate: overlap matrix invalid: " + verdict.message);
    if (n_paths < 2) throw ConfigError("simulate: need at least two paths");
    std::vector<double> extra(q.entries().begin(), q.entries().end());
    extra.insert(extra.end(), checkpoints.begin(), checkpoints.end());
    PathEngine engine(sol, make_time_grid(sol.measure(), steps, extra));
    const auto& grid = engine.grid();
    const std::size_t d = q.size(), nt = grid.size(), nc = checkpoints.size();
    const bool pair = d >= 2;

    std::vector<char> observe(nt, 0);
    std::vector<std::size_t> slot(nt, 0);
    for (std::size_t c = 0; c < nc; ++c) {
        const std::size_t k = grid.index_of(checkpoints[c]);
        observe[k] = 1;
        slot[k] = c;
    }
    ClusterPlan plan(level_knots(sol.measure()), d);
    for (std::size_t p = 0; p < n_paths; ++p) plan.add(q);
    Ensemble ens(n_paths, d, sol.measure().h());
    std::vector<double> mag(nc * n_paths), field(nc * n_paths), br(pair ? nc * n_paths : 0);
    // Bracket of replicas 0 and 1 accumulated from Y increments at every step.
    std::vector<double> running(pair ? n_paths : 0, 0.0), prev0, prev1;
    if (pair) {
        prev0.assign(n_paths, sol.measure().h());
        prev1.assign(n_paths, sol.measure().h());
    }
    std::vector<char> every(nt, 1);
    engine.advance(ens, plan, 0, nt - 1, seed, "ensemble", every,
                   [&](std::size_t k, std::size_t p0, std::size_t p1) {
                       if (pair)
                           for (std::size_t p = p0; p < p1; ++p) {
                               const double y0 = ens.Y[ens.at(p, 0)], y1 = ens.Y[ens.at(p, 1)];
                               running[p] += (y0 - prev0[p]) * (y1 - prev1[p]);
                               prev0[p] = y0;
                               prev1[p] = y1;
                           }
                       if (!observe[k]) return;
                       const std::size_t c = slot[k];
                       const TimeSlice slice = sol.locate(grid.times[k]);
                       for (std::size_t p = p0; p < p1; ++p) {
                           const double x = ens.X[ens.at(p, 0)];
                           mag[c * n_paths + p] = sol.ux(slice, x);
                           field[c * n_paths + p] = x;
                           if (pair) br[c * n_paths + p] = running[p];
                       }
                   },
                   threads);
    std::vector<CheckpointStats> out(nc);
    const auto& mix = sol.mixture();
    for (std::size_t c = 0; c < nc; ++c) {
        MeanAccumulator a, f, b;
        for (std::size_t p = 0; p < n_paths; ++p) {
            a.add(mag[c * n_paths + p]);
            f.add(field[c * n_paths + p]);
            if (pair) b.add(br[c * n_paths + p]);
        }
        out[c].t = checkpoints[c];
        out[c].magnetization = {a.mean(), a.std_error()};
        out[c].field = {f.mean(), f.std_error()};
        if (pair) {
            out[c].bracket = {b.mean(), b.std_error()};
            out[c].bracket_target = mix.xi_prime(std::min(checkpoints[c], q(0, 1)));
        }
    }
    return out;
}

}  // namespace spinlab
