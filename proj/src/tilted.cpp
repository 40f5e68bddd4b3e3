#include "spinlab/tilted.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "spinlab/diffusion.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/parallel.hpp"
#include "spinlab/quadrature.hpp"

namespace spinlab {

KernelTable::KernelTable(std::function<double(double)> upper, std::function<double(double)> lower, double exponent,
                         double sigma, double s_lo, double s_hi, double ds, std::size_t nz, double z_max)
    : exponent_(exponent), sigma_(sigma), s_lo_(s_lo), ds_(ds), nz_(nz), z_max_(z_max) {
    if (!(exponent >= 0.0 && exponent <= 1.0)) throw DomainError("kernel: exponent outside [0, 1]");
    if (!(sigma >= 0.0)) throw DomainError("kernel: negative increment");
    if (nz < 16 || !(s_hi > s_lo) || !(ds > 0.0)) throw ConfigError("kernel: table too small");
    dz_ = 2.0 * z_max / static_cast<double>(nz - 1);
    gaussian_ = exponent == 0.0 || sigma == 0.0;
    if (gaussian_) return;
    ns_ = static_cast<std::size_t>(std::ceil((s_hi - s_lo) / ds)) + 1;
    pdf_.resize(ns_ * nz_);
    cdf_.resize(ns_ * nz_);
    for (std::size_t r = 0; r < ns_; ++r) {
        const double s = s_lo_ + ds_ * static_cast<double>(r);
        const double base = lower(s);
        double* p = pdf_.data() + r * nz_;
        double* c = cdf_.data() + r * nz_;
        for (std::size_t j = 0; j < nz_; ++j) {
            const double z = -z_max_ + dz_ * static_cast<double>(j);
            p[j] = std::exp(exponent_ * (upper(s + sigma_ * z) - base)) * gaussian_pdf(z);
        }
        c[0] = 0.0;
        for (std::size_t j = 1; j < nz_; ++j) c[j] = c[j - 1] + 0.5 * dz_ * (p[j - 1] + p[j]);
        const double total = c[nz_ - 1];
        const double err = std::abs(total - 1.0);
        max_norm_error_ = std::max(max_norm_error_, err);
        if (!(err <= hard_limit)) {
            std::ostringstream os;
            os << "kernel: density at s = " << s << " integrates to " << total
               << "; level tables are inconsistent";
            throw NumericalError(os.str());
        }
        for (std::size_t j = 0; j < nz_; ++j) {
            p[j] /= total;
            c[j] /= total;
        }
    }
}

double KernelTable::density(double s, double z) const {
    if (gaussian_) return gaussian_pdf(z);
    if (std::abs(z) > z_max_) return 0.0;
    const double fr = (s - s_lo_) / ds_;
    if (fr < 0.0 || fr > static_cast<double>(ns_ - 1)) throw DomainError("kernel: field outside the table");
    const std::size_t r = static_cast<std::size_t>(std::lround(fr));
    const double fj = (z + z_max_) / dz_;
    const std::size_t j = std::min(static_cast<std::size_t>(fj), nz_ - 2);
    const double w = fj - static_cast<double>(j);
    const double* p = pdf_.data() + r * nz_;
    return (1.0 - w) * p[j] + w * p[j + 1];
}

double KernelTable::sample(double s, Rng& rng) const {
    if (gaussian_) return std::normal_distribution<double>(0.0, 1.0)(rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double fr = (s - s_lo_) / ds_;
    if (!(fr >= 0.0 && fr <= static_cast<double>(ns_ - 1))) {
        std::ostringstream os;
        os << "kernel: parent field " << s << " outside the table range";
        throw DomainError(os.str());
    }
    std::size_t r = std::min(static_cast<std::size_t>(fr), ns_ - 2);
    if (unif(rng) < fr - static_cast<double>(r)) ++r;
    const double* c = cdf_.data() + r * nz_;
    const double u = unif(rng);
    const std::size_t j = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(c, c + nz_, u) - c), nz_ - 1);
    const std::size_t lo = j == 0 ? 0 : j - 1;
    const double span = c[j] - c[lo];
    const double frac = span > 0.0 ? (u - c[lo]) / span : 0.0;
    return -z_max_ + dz_ * (static_cast<double>(lo) + frac);
}

double TiltKernels::max_normalization_error() const {
    double m = 0.0;
    for (const auto& t : tables) m = std::max(m, t.max_normalization_error());
    return m;
}

TiltKernels build_tilt_kernels(const MixtureSpec& mixture, const ParisiMeasure& measure,
                               const ColeHopfLevels& levels) {
    TiltKernels k;
    k.knots = levels.knots;
    k.h = measure.h();
    k.increments = cascade_increments(mixture, k.knots);
    // Parent fields stay within h +- 9 standard deviations of the total increment.
    const double spread = 9.0 * std::sqrt(mixture.xi_prime(measure.q_star())) + 1.0;
    const double lo = std::max(measure.h() - spread, levels.levels.front().lo());
    const double hi = std::min(measure.h() + spread, levels.levels.front().hi());
    for (std::size_t d = 1; d < k.knots.size(); ++d) {
        const UniformTable& up = levels.levels[d];
        const UniformTable& down = levels.levels[d - 1];
        k.tables.emplace_back([&up](double s) { return up(s); }, [&down](double s) { return down(s); },
                              measure.cdf(k.knots[d - 1]), k.increments[d - 1], lo, hi);
    }
    return k;
}

TiltedCascade sample_tilted(const CascadeRealization& base, const TiltKernels& kernels, std::uint64_t seed) {
    if (base.knots() != kernels.knots) throw ConfigError("tilt: cascade and kernels use different levels");
    TiltedCascade tc;
    tc.base = &base;
    const auto& nodes = base.nodes();
    tc.eta.assign(nodes.size(), 0.0);
    tc.field.assign(nodes.size(), kernels.h);
    Rng rng = make_rng(seed, "tilt");
    for (std::size_t n = 1; n < nodes.size(); ++n) {
        const std::size_t d = static_cast<std::size_t>(nodes[n].depth);
        const double s = tc.field[static_cast<std::size_t>(nodes[n].parent)];
        tc.eta[n] = kernels.tables[d - 1].sample(s, rng);
        tc.field[n] = s + kernels.increments[d - 1] * tc.eta[n];
    }
    return tc;
}

double tilted_field(const TiltedCascade& tc, std::size_t leaf) {
    return tc.field[tc.base->leaf_node(leaf)];
}

double sample_tilted_path(const TiltKernels& kernels, Rng& rng) {
    double s = kernels.h;
    for (std::size_t d = 0; d < kernels.tables.size(); ++d) s += kernels.increments[d] * kernels.tables[d].sample(s, rng);
    return s;
}

TiltingReport tilting_identity_check(const MixtureSpec& mixture, const ParisiMeasure& measure,
                                     const ColeHopfLevels& levels, const TiltingOptions& opt) {
    if (opt.batches < 2 || opt.n_samples < opt.batches) throw ConfigError("tilt-check: too few samples");
    if (level_knots(measure).size() > 3) throw ConfigError("tilt-check: at most two levels are supported");
    if (opt.n_sites > 2) throw ConfigError("tilt-check: at most two sites are supported");
    const TiltKernels kernels = build_tilt_kernels(mixture, measure, levels);
    const std::size_t per_batch = opt.n_samples / opt.batches;
    std::vector<double> lhs(opt.batches), rhs(opt.batches), tail(opt.batches, 0.0);
    const auto sig = kernels.increments;
    parallel_for(opt.batches, opt.threads, [&](std::size_t b) {
        double sum_l = 0.0, sum_r = 0.0;
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t i = 0; i < per_batch; ++i) {
            const std::uint64_t idx = b * per_batch + i;
            const auto cascade = sample_cascade(measure, opt.truncation, derive_seed(opt.seed, "tilt-cascade", idx));
            for (double t : cascade.tail_mass()) tail[b] = std::max(tail[b], t);
            const auto& nodes = cascade.nodes();
            const std::size_t L = cascade.leaf_count();
            std::vector<double> logc(L, 0.0), prod_plain(L, 1.0), prod_tilt(L, 1.0);
            Rng rng = make_rng(opt.seed, "tilt-sites", idx);
            std::vector<double> field(nodes.size());
            for (std::size_t site = 0; site < opt.n_sites; ++site) {
                // Untilted copy of the node Gaussians for this site.
                field[0] = measure.h();
                for (std::size_t n = 1; n < nodes.size(); ++n) {
                    const std::size_t d = static_cast<std::size_t>(nodes[n].depth);
                    field[n] = field[static_cast<std::size_t>(nodes[n].parent)] + sig[d - 1] * normal(rng);
                }
                for (std::size_t l = 0; l < L; ++l) {
                    const double g = field[cascade.leaf_node(l)];
                    logc[l] += log_cosh(g);
                    prod_plain[l] *= std::tanh(g);
                }
                const auto tc = sample_tilted(cascade, kernels, derive_seed(opt.seed, "tilt-eta", idx * 4 + site));
                for (std::size_t l = 0; l < L; ++l) prod_tilt[l] *= std::tanh(tilted_field(tc, l));
            }
            const auto& w = cascade.weights();
            double cmax = -INFINITY;
            for (std::size_t l = 0; l < L; ++l)
                if (w[l] > 0.0) cmax = std::max(cmax, logc[l]);
            double num = 0.0, den = 0.0, tilt = 0.0;
            for (std::size_t l = 0; l < L; ++l) {
                const double wp = w[l] * std::exp(logc[l] - cmax);
                num += wp * prod_plain[l];
                den += wp;
                tilt += w[l] * prod_tilt[l];
            }
            sum_l += num / den;
            sum_r += tilt;
        }
        lhs[b] = sum_l / static_cast<double>(per_batch);
        rhs[b] = sum_r / static_cast<double>(per_batch);
    });
    TiltingReport rep;
    rep.n_sites = opt.n_sites;
    rep.n_samples = per_batch * opt.batches;
    rep.truncation = opt.truncation;
    rep.reweighted = batch_means(lhs);
    rep.tilted = batch_means(rhs);
    std::vector<double> diff(opt.batches);
    for (std::size_t b = 0; b < opt.batches; ++b) diff[b] = lhs[b] - rhs[b];
    const Estimate d = batch_means(diff);
    rep.z = d.std_error > 0.0 ? std::abs(d.value) / d.std_error : (std::abs(d.value) <= 1e-12 ? 0.0 : INFINITY);
    rep.pass = rep.z <= 3.0;
    rep.max_tail_mass = *std::max_element(tail.begin(), tail.end());
    rep.max_normalization_error = kernels.max_normalization_error();
    return rep;
}

LawEquivalenceReport law_equivalence_check(const PdeSolution& sol, const ColeHopfLevels& levels,
                                           std::size_t n_samples, int steps, std::uint64_t seed, unsigned threads) {
    if (n_samples < 2) throw ConfigError("law check: need at least two samples");
    const auto& measure = sol.measure();
    const double h = measure.h();
    const TiltKernels kernels = build_tilt_kernels(sol.mixture(), measure, levels);
    std::array<MeanAccumulator, 4> a, b;
    Rng rng = make_rng(seed, "law-tilted");
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double v = sample_tilted_path(kernels, rng) - h;
        double p = 1.0;
        for (auto& acc : a) acc.add(p *= v);
    }
    const TimeGrid grid = make_time_grid(measure, steps);
    PathEngine engine(sol, grid);
    ClusterPlan plan(level_knots(measure), 1);
    plan.add_independent(n_samples);
    Ensemble ens(n_samples, 1, h);
    engine.advance(ens, plan, 0, grid.index_of(measure.q_star()), seed, "law-sde", {}, {}, threads);
    for (double x : ens.X) {
        double p = 1.0;
        for (auto& acc : b) acc.add(p *= x - h);
    }
    LawEquivalenceReport rep;
    rep.n_samples = n_samples;
    rep.pass = true;
    for (std::size_t k = 0; k < 4; ++k) {
        rep.tilted[k] = {a[k].mean(), a[k].std_error()};
        rep.sde[k] = {b[k].mean(), b[k].std_error()};
        rep.z[k] = z_score(rep.tilted[k], rep.sde[k]);
        rep.pass = rep.pass && rep.z[k] <= 3.0;
    }
    return rep;
}

}  // namespace spinlab
