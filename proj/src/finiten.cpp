#include "spinlab/finiten.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "spinlab/errors.hpp"
#include "spinlab/parallel.hpp"
#include "spinlab/rng.hpp"

namespace spinlab {

CouplingRealization draw_coupling(std::size_t N, const MixtureSpec& mixture, double h, std::uint64_t seed) {
    if (N < 1 || N > kMaxSites) {
        std::ostringstream os;
        os << "finite-n: N = " << N << " outside 1.." << kMaxSites;
        throw ConfigError(os.str());
    }
    CouplingRealization c;
    c.N = N;
    c.h = h;
    Rng rng = make_rng(seed, "coupling");
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& t : mixture.terms()) {
        if (t.beta == 0.0) continue;
        if (t.degree > 3) {
            std::ostringstream os;
            os << "finite-n: degree " << t.degree << " is unsupported (dense tensors up to degree 3)";
            throw ConfigError(os.str());
        }
        const std::size_t entries = t.degree == 2 ? N * N : N * N * N;
        if (entries > kMaxTensorEntries) {
            std::ostringstream os;
            os << "finite-n: degree-" << t.degree << " tensor with N = " << N << " exceeds " << kMaxTensorEntries
               << " entries";
            throw ConfigError(os.str());
        }
        auto& g = c.tensors[static_cast<std::size_t>(t.degree)];
        g.resize(entries);
        for (double& v : g) v = normal(rng);
        c.scale[static_cast<std::size_t>(t.degree)] = t.beta / std::pow(static_cast<double>(N), 0.5 * (t.degree - 1));
    }
    return c;
}

double hamiltonian(const CouplingRealization& c, const Spins& s) {
    const std::size_t N = c.N;
    if (s.size() != N) throw ConfigError("hamiltonian: configuration has the wrong size");
    double H = 0.0;
    if (!c.tensors[2].empty()) {
        const auto& g = c.tensors[2];
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < N; ++j) row += g[i * N + j] * s[j];
            acc += row * s[i];
        }
        H += c.scale[2] * acc;
    }
    if (!c.tensors[3].empty()) {
        const auto& g = c.tensors[3];
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                double row = 0.0;
                const double* gij = g.data() + (i * N + j) * N;
                for (std::size_t k = 0; k < N; ++k) row += gij[k] * s[k];
                acc += row * s[i] * s[j];
            }
        H += c.scale[3] * acc;
    }
    double m = 0.0;
    for (int v : s) m += v;
    return H + c.h * m;
}

double flip_delta(const CouplingRealization& c, const Spins& s, std::size_t k) {
    // Only terms in which k appears an odd number of times change sign.
    const std::size_t N = c.N;
    const double sk = s[k];
    double odd = c.h;
    if (!c.tensors[2].empty()) {
        const auto& g = c.tensors[2];
        double acc = 0.0;
        for (std::size_t j = 0; j < N; ++j)
            if (j != k) acc += (g[k * N + j] + g[j * N + k]) * s[j];
        odd += c.scale[2] * acc;
    }
    if (!c.tensors[3].empty()) {
        const auto& g = c.tensors[3];
        double acc = 0.0;
        for (std::size_t a = 0; a < N; ++a) {
            if (a == k) continue;
            for (std::size_t b = 0; b < N; ++b) {
                if (b == k) continue;
                acc += (g[(k * N + a) * N + b] + g[(a * N + k) * N + b] + g[(a * N + b) * N + k]) * s[a] * s[b];
            }
        }
        acc += g[(k * N + k) * N + k];
        odd += c.scale[3] * acc;
    }
    return -2.0 * sk * odd;
}

double metropolis_accept(double delta) { return delta >= 0.0 ? 1.0 : std::exp(delta); }

Spins spins_from_index(std::size_t index, std::size_t N) {
    Spins s(N);
    for (std::size_t i = 0; i < N; ++i) s[i] = (index >> i) & 1 ? 1 : -1;
    return s;
}

std::vector<double> metropolis_transition_matrix(const CouplingRealization& c) {
    const std::size_t N = c.N;
    if (N > 12) throw ConfigError("transition matrix: N too large for enumeration");
    const std::size_t S = std::size_t{1} << N;
    std::vector<double> P(S * S, 0.0);
    for (std::size_t a = 0; a < S; ++a) {
        const Spins s = spins_from_index(a, N);
        double stay = 1.0;
        for (std::size_t k = 0; k < N; ++k) {
            const double p = metropolis_accept(flip_delta(c, s, k)) / static_cast<double>(N);
            P[a * S + (a ^ (std::size_t{1} << k))] += p;
            stay -= p;
        }
        P[a * S + a] += stay;
    }
    return P;
}

std::vector<double> gibbs_distribution(const CouplingRealization& c) {
    const std::size_t S = std::size_t{1} << c.N;
    std::vector<double> logw(S), p(S);
    for (std::size_t a = 0; a < S; ++a) logw[a] = hamiltonian(c, spins_from_index(a, c.N));
    const double mx = *std::max_element(logw.begin(), logw.end());
    double z = 0.0;
    for (std::size_t a = 0; a < S; ++a) z += p[a] = std::exp(logw[a] - mx);
    for (double& v : p) v /= z;
    return p;
}

namespace {

struct Chain {
    Spins s;
    double energy = 0.0;
};

double gelman_rubin(const std::vector<std::vector<double>>& traces) {
    const std::size_t m = traces.size();
    if (m < 2 || traces[0].size() < 2) return 1.0;
    const double n = static_cast<double>(traces[0].size());
    MeanAccumulator means;
    double W = 0.0;
    for (const auto& t : traces) {
        MeanAccumulator a;
        for (double v : t) a.add(v);
        means.add(a.mean());
        W += a.variance();
    }
    W /= static_cast<double>(m);
    const double B_over_n = means.variance();
    if (W <= 0.0) return B_over_n > 0.0 ? INFINITY : 1.0;
    return std::sqrt(((n - 1.0) / n * W + B_over_n) / W);
}

}  // namespace

GibbsReport gibbs_sample(std::size_t N, const MixtureSpec& mixture, double h, const GibbsOptions& opt) {
    if (opt.n_chains < 2 || opt.n_chains % 2) throw ConfigError("finite-n: n_chains must be even and at least 2");
    if (opt.sweeps < 2) throw ConfigError("finite-n: need at least two sweeps");
    if (opt.n_disorder < 1) throw ConfigError("finite-n: n_disorder must be positive");
    const std::size_t burn = opt.burn_in ? opt.burn_in : opt.sweeps / 2;
    if (burn >= opt.sweeps) throw ConfigError("finite-n: burn_in must be below sweeps");
    const std::size_t pairs = opt.n_chains / 2, samples = opt.sweeps - burn, bins = opt.histogram_bins;

    struct DisorderResult {
        std::vector<double> overlap, mag, first, first_pair;
        std::vector<double> hist;
        double rhat = 1.0, drift = 0.0;
    };
    std::vector<DisorderResult> res(opt.n_disorder);
    parallel_for(opt.n_disorder, opt.threads, [&](std::size_t dis) {
        const CouplingRealization c = draw_coupling(N, mixture, h, derive_seed(opt.seed, "disorder", dis));
        DisorderResult& out = res[dis];
        out.hist.assign(bins, 0.0);
        std::vector<Chain> chains(opt.n_chains);
        std::vector<Rng> rngs;
        for (std::size_t k = 0; k < opt.n_chains; ++k) {
            rngs.push_back(make_rng(opt.seed, "chain", dis * 4096 + k));
            std::uniform_int_distribution<int> coin(0, 1);
            chains[k].s.resize(N);
            for (int& v : chains[k].s) v = coin(rngs[k]) ? 1 : -1;
            chains[k].energy = hamiltonian(c, chains[k].s);
        }
        std::vector<std::vector<double>> traces(opt.n_chains);
        std::vector<double> ov_sum(pairs, 0.0), fp_sum(pairs, 0.0), mag_sum(opt.n_chains, 0.0),
            first_sum(opt.n_chains, 0.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (std::size_t sweep = 0; sweep < opt.sweeps; ++sweep) {
            for (std::size_t k = 0; k < opt.n_chains; ++k) {
                Chain& ch = chains[k];
                for (std::size_t step = 0; step < N; ++step) {
                    const std::size_t site = static_cast<std::size_t>(unif(rngs[k]) * static_cast<double>(N)) % N;
                    const double d = flip_delta(c, ch.s, site);
                    if (d >= 0.0 || unif(rngs[k]) < metropolis_accept(d)) {
                        ch.s[site] = -ch.s[site];
                        ch.energy += d;
                    }
                }
                if ((sweep + 1) % 100 == 0) {
                    const double exact = hamiltonian(c, ch.s);
                    const double drift = std::abs(exact - ch.energy) / std::max(1.0, std::abs(exact));
                    out.drift = std::max(out.drift, drift);
                    if (drift > 1e-8) throw NumericalError("finite-n: tracked energy drifted from the recomputed value");
                    ch.energy = exact;
                }
            }
            if (sweep < burn) continue;
            for (std::size_t k = 0; k < opt.n_chains; ++k) {
                double m = 0.0;
                for (int v : chains[k].s) m += v;
                m /= static_cast<double>(N);
                traces[k].push_back(m);
                mag_sum[k] += m;
                first_sum[k] += chains[k].s[0];
            }
            for (std::size_t p = 0; p < pairs; ++p) {
                const Spins& a = chains[2 * p].s;
                const Spins& b = chains[2 * p + 1].s;
                double r = 0.0;
                for (std::size_t i = 0; i < N; ++i) r += a[i] * b[i];
                r /= static_cast<double>(N);
                ov_sum[p] += r;
                fp_sum[p] += a[0] * b[0];
                const std::size_t bin = std::min(bins - 1, static_cast<std::size_t>((r + 1.0) / 2.0 * static_cast<double>(bins)));
                out.hist[bin] += 1.0;
            }
        }
        const double ns = static_cast<double>(samples);
        for (std::size_t p = 0; p < pairs; ++p) {
            out.overlap.push_back(ov_sum[p] / ns);
            out.first_pair.push_back(fp_sum[p] / ns);
        }
        for (std::size_t k = 0; k < opt.n_chains; ++k) {
            out.mag.push_back(mag_sum[k] / ns);
            out.first.push_back(first_sum[k] / ns);
        }
        out.rhat = gelman_rubin(traces);
    });

    GibbsReport rep;
    rep.N = N;
    MeanAccumulator ov, mg, fs, fp;
    rep.histogram.assign(bins, 0.0);
    double total = 0.0;
    for (const auto& r : res) {
        for (double v : r.overlap) ov.add(v);
        for (double v : r.mag) mg.add(v);
        for (double v : r.first) fs.add(v);
        for (double v : r.first_pair) fp.add(v);
        for (std::size_t b = 0; b < bins; ++b) {
            rep.histogram[b] += r.hist[b];
            total += r.hist[b];
        }
        rep.max_rhat = std::max(rep.max_rhat, r.rhat);
        rep.max_energy_drift = std::max(rep.max_energy_drift, r.drift);
    }
    for (double& v : rep.histogram) v /= total;
    for (std::size_t b = 0; b <= bins; ++b) rep.histogram_edges.push_back(-1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(bins));
    rep.overlap = {ov.mean(), ov.std_error()};
    rep.magnetization = {mg.mean(), mg.std_error()};
    rep.first_spin = {fs.mean(), fs.std_error()};
    rep.first_spin_pair = {fp.mean(), fp.std_error()};
    rep.rhat_warning = rep.max_rhat > 1.1;
    return rep;
}

std::pair<Spins, Spins> configurations_with_overlap(std::size_t N, double r, std::uint64_t seed) {
    if (!(r >= -1.0 && r <= 1.0)) throw ConfigError("overlap target outside [-1, 1]");
    Rng rng = make_rng(seed, "configurations");
    std::uniform_int_distribution<int> coin(0, 1);
    Spins a(N);
    for (int& v : a) v = coin(rng) ? 1 : -1;
    Spins b = a;
    const auto flips = static_cast<std::size_t>(std::lround(static_cast<double>(N) * (1.0 - r) / 2.0));
    for (std::size_t i = 0; i < std::min(flips, N); ++i) b[i] = -b[i];
    return {a, b};
}

namespace {

double overlap_of(const Spins& a, const Spins& b) {
    double r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) r += a[i] * b[i];
    return r / static_cast<double>(a.size());
}

CovarianceReport finish(double overlap, const MeanAccumulator& acc, double target) {
    CovarianceReport r;
    r.overlap = overlap;
    r.covariance = {acc.mean(), acc.std_error()};
    r.target = target;
    const double se = acc.std_error();
    r.z = se > 0.0 ? std::abs(acc.mean() - target) / se : (std::abs(acc.mean() - target) <= 1e-12 ? 0.0 : INFINITY);
    r.pass = r.z <= 3.0;
    return r;
}

}  // namespace

std::vector<CovarianceReport> covariance_check(std::size_t N, const MixtureSpec& mixture,
                                               const std::vector<double>& overlaps, std::size_t n_redraws,
                                               std::uint64_t seed) {
    if (n_redraws < 2) throw ConfigError("covariance check: need at least two redraws");
    std::vector<std::pair<Spins, Spins>> configs;
    for (std::size_t i = 0; i < overlaps.size(); ++i) configs.push_back(configurations_with_overlap(N, overlaps[i], derive_seed(seed, "cov-config", i)));
    std::vector<MeanAccumulator> acc(overlaps.size());
    for (std::size_t r = 0; r < n_redraws; ++r) {
        const auto c = draw_coupling(N, mixture, 0.0, derive_seed(seed, "cov-redraw", r));
        for (std::size_t i = 0; i < configs.size(); ++i)
            acc[i].add(hamiltonian(c, configs[i].first) * hamiltonian(c, configs[i].second));
    }
    std::vector<CovarianceReport> out;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const double R = overlap_of(configs[i].first, configs[i].second);
        out.push_back(finish(R, acc[i], static_cast<double>(N) * mixture.xi(R)));
    }
    return out;
}

DecompositionReport decomposition_check(std::size_t N, const MixtureSpec& mixture, std::size_t n_redraws,
                                        std::uint64_t seed) {
    if (!mixture.is_pure()) throw ConfigError("decomposition check: the mixture must be pure");
    int p = 0;
    double beta = 0.0;
    for (const auto& t : mixture.terms())
        if (t.beta > 0.0) {
            p = t.degree;
            beta = t.beta;
        }
    if (p != 2 && p != 3) throw ConfigError("decomposition check: degree must be 2 or 3");
    if (N < 2 || N > 64) throw ConfigError("decomposition check: N must lie in 2..64");
    if (n_redraws < 2) throw ConfigError("decomposition check: need at least two redraws");

    // Configurations of sites 2..N (index 0 is the cavity site and is ignored).
    const std::vector<double> targets{1.0, 0.5, 0.0};
    std::vector<std::pair<Spins, Spins>> configs;
    for (std::size_t i = 0; i < targets.size(); ++i) configs.push_back(configurations_with_overlap(N, targets[i], derive_seed(seed, "dec-config", i)));

    std::vector<MeanAccumulator> cov(targets.size());
    MeanAccumulator rem, expm;
    for (std::size_t r = 0; r < n_redraws; ++r) {
        const auto c = draw_coupling(N, mixture, 0.0, derive_seed(seed, "dec-redraw", r));
        const auto& g = c.tensors[static_cast<std::size_t>(p)];
        const double sc = c.scale[static_cast<std::size_t>(p)];
        auto cavity = [&](const Spins& s) {
            // Tuples in which index 0 appears exactly once.
            double acc = 0.0;
            if (p == 2) {
                for (std::size_t j = 1; j < N; ++j) acc += (g[j] + g[j * N]) * s[j];
            } else {
                for (std::size_t a = 1; a < N; ++a)
                    for (std::size_t b = 1; b < N; ++b)
                        acc += (g[a * N + b] + g[(a * N) * N + b] + g[(a * N + b) * N]) * s[a] * s[b];
            }
            return sc * acc;
        };
        for (std::size_t i = 0; i < configs.size(); ++i) cov[i].add(cavity(configs[i].first) * cavity(configs[i].second));
        // r(1, rho) - r(-1, rho): only tuples with an odd number (>= 3) of zeros
        // survive, which for p <= 3 is g_000 alone and does not depend on rho.
        const double dr = p == 3 ? 2.0 * sc * g[0] : 0.0;
        rem.add(dr * dr);
        expm.add(std::exp(2.0 * std::abs(dr)));
    }
    DecompositionReport rep;
    rep.degree = p;
    rep.N = N;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& [a, b] = configs[i];
        double rho = 0.0;
        for (std::size_t j = 1; j < N; ++j) rho += a[j] * b[j];
        rho /= static_cast<double>(N);
        const double R12 = overlap_of(a, b);
        rep.cavity.push_back(finish(rho, cov[i], mixture.xi_prime(rho)));
        rep.cavity_bias_bound = std::max(rep.cavity_bias_bound, std::abs(mixture.xi_prime(rho) - mixture.xi_prime(R12)));
    }
    double target = 0.0;
    for (int l = 3; l <= p; l += 2) {
        double binom = 1.0;
        for (int k = 0; k < l; ++k) binom = binom * (p - k) / (k + 1);
        target += binom * std::pow(static_cast<double>(N - 1), p - l);
    }
    rep.remainder_target = 4.0 * beta * beta * target / std::pow(static_cast<double>(N), p - 1);
    rep.remainder_variance = {rem.mean(), rem.std_error()};
    const double se = rem.std_error();
    rep.remainder_pass = se > 0.0 ? std::abs(rem.mean() - rep.remainder_target) <= 3.0 * se
                                  : std::abs(rem.mean() - rep.remainder_target) <= 1e-15;
    rep.exp_moment = {expm.mean(), expm.std_error()};
    rep.pass = rep.remainder_pass;
    for (const auto& c : rep.cavity) rep.pass = rep.pass && c.pass;
    return rep;
}

}  // namespace spinlab
