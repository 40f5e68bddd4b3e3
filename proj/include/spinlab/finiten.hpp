#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spinlab/mixture.hpp"
#include "spinlab/numerics.hpp"

namespace spinlab {

using Spins = std::vector<int>;

/// Dense Gaussian couplings g_{i_1..i_p} over all ordered index tuples for
/// each active degree (2 or 3), plus the external field h.
struct CouplingRealization {
    std::size_t N = 0;
    double h = 0.0;
    /// tensors[p] has N^p entries (empty when degree p is inactive).
    std::vector<std::vector<double>> tensors = std::vector<std::vector<double>>(4);
    /// beta_p / N^{(p-1)/2}.
    std::vector<double> scale = std::vector<double>(4, 0.0);
};

inline constexpr std::size_t kMaxSites = 512;
inline constexpr std::size_t kMaxTensorEntries = std::size_t{1} << 25;

CouplingRealization draw_coupling(std::size_t N, const MixtureSpec& mixture, double h, std::uint64_t seed);

/// H_N(sigma) + h sum_i sigma_i; the Gibbs weight is exp(H).
double hamiltonian(const CouplingRealization& c, const Spins& sigma);
/// H(sigma with spin k flipped) - H(sigma).
double flip_delta(const CouplingRealization& c, const Spins& sigma, std::size_t k);

/// Metropolis acceptance probability min(1, exp(delta)).
double metropolis_accept(double delta);

/// Transition matrix of the random-scan single-flip Metropolis chain over
/// all 2^N configurations (row-major; configuration bits map to spins).
std::vector<double> metropolis_transition_matrix(const CouplingRealization& c);
/// Exact Gibbs probabilities over all 2^N configurations.
std::vector<double> gibbs_distribution(const CouplingRealization& c);
Spins spins_from_index(std::size_t index, std::size_t N);

struct GibbsOptions {
    std::size_t sweeps = 2000;
    std::size_t burn_in = 0;  // 0 means sweeps / 2
    std::size_t n_chains = 8; // even; chains (2k, 2k+1) form replica pairs
    std::size_t n_disorder = 4;
    std::size_t histogram_bins = 41;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct GibbsReport {
    std::size_t N = 0;
    Estimate overlap;           // E<R12> from paired chains
    Estimate magnetization;     // E<(1/N) sum sigma_i>
    Estimate first_spin;        // E<sigma_1>
    Estimate first_spin_pair;   // E<sigma_1^1 sigma_1^2>
    std::vector<double> histogram_edges;
    std::vector<double> histogram;  // normalized counts of R12
    double max_rhat = 0.0;
    bool rhat_warning = false;
    double max_energy_drift = 0.0;
};

/// Metropolis Gibbs sampling over n_disorder coupling draws of size N.
GibbsReport gibbs_sample(std::size_t N, const MixtureSpec& mixture, double h, const GibbsOptions& options);

struct CovarianceReport {
    double overlap = 0.0;
    Estimate covariance;
    double target = 0.0;
    double z = 0.0;
    bool pass = false;
};

/// Empirical Cov(H(s1), H(s2)) over coupling redraws against N xi(R12), for
/// fixed configurations with the requested overlaps.
std::vector<CovarianceReport> covariance_check(std::size_t N, const MixtureSpec& mixture,
                                               const std::vector<double>& overlaps, std::size_t n_redraws,
                                               std::uint64_t seed);

/// Cavity decomposition of a pure model around site 1:
/// H = H~(rho) + sigma_1 y(rho) + r(sigma_1, rho).
struct DecompositionReport {
    int degree = 2;
    std::size_t N = 0;
    std::vector<CovarianceReport> cavity;  // Cov(y(s1), y(s2)) vs xi'(R_rho)
    double cavity_bias_bound = 0.0;        // max |xi'(R_rho) - xi'(R12)|
    Estimate remainder_variance;           // Var(r(1,rho) - r(-1,rho))
    double remainder_target = 0.0;         // 4 beta^2 / N^{p-1} sum_{odd l>=3} C(p,l) (N-1)^{p-l}
    bool remainder_pass = false;
    Estimate exp_moment;                   // E exp(2 max_rho |r(1,rho) - r(-1,rho)|)
    bool pass = false;
};

DecompositionReport decomposition_check(std::size_t N, const MixtureSpec& mixture, std::size_t n_redraws,
                                        std::uint64_t seed);

/// Deterministic pair of configurations with (1/N) sum s1 s2 closest to r.
std::pair<Spins, Spins> configurations_with_overlap(std::size_t N, double r, std::uint64_t seed);

}  // namespace spinlab
