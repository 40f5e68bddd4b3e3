#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spinlab/gg.hpp"
#include "spinlab/parisi.hpp"

namespace spinlab {

/// E prod_l prod_{i in C_l} s_i^l: replica l carries the sites in sets[l]
/// (1-based site indices up to n_sites).
struct MomentQuery {
    std::size_t n_sites = 1;
    std::vector<std::vector<std::size_t>> sets;

    std::size_t replicas() const { return sets.size(); }
    /// Throws ConfigError on empty sets or out-of-range sites.
    void validate() const;
};

enum class StatMethod { cascade_mc, pde_tree, closed_form };
const char* to_string(StatMethod m);

struct StatResult {
    double value = 0.0;
    double std_error = 0.0;
    StatMethod method = StatMethod::closed_form;
    bool applicable = true;
    std::map<std::string, double> diagnostics;
};

struct MomentOptions {
    std::size_t n_outer = 20000;  // overlap matrices drawn
    std::size_t n_paths = 1;      // bundles per site per overlap matrix
    int steps = 4000;
    std::size_t batches = 30;
    OverlapSampler sampler = OverlapSampler::exact;
    std::size_t truncation = 200;
    std::size_t arrays_per_cascade = 50;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

/// Cascade Monte Carlo: overlap matrix of the replicas from the RPC, then an
/// independent coupled bundle per site; estimator prod tanh(X^i_{q_*}(sigma^l)).
StatResult moment_mc(const PdeSolution& sol, const MomentQuery& query, const MomentOptions& options);

/// E prod_j u_x(q_j, X_{q_j})^{k_j} along one path by backward linear PDEs
/// w_t + xi''/2 (w_xx + 2 m u_x w_x) = 0; times strictly increasing in [0, q_*].
double tree_moment_pde(const PdeSolution& sol, const std::vector<std::pair<double, int>>& spec);

struct TwoSpinResult {
    StatResult pde;     // sum_k mass_k E u_x(q_k, X_{q_k})^2
    StatResult mc;      // two replicas, one site
    StatResult mean;    // sum_k mass_k q_k (needs self-consistency)
};
TwoSpinResult two_spin(const PdeSolution& sol, const MomentOptions& options);

struct ThreeSpinResult {
    StatResult closed;  // closed form from tree moments
    StatResult mc;      // three replicas, one site
};
ThreeSpinResult three_spin(const PdeSolution& sol, const MomentOptions& options);

/// Closed-form three-spin value from the pair function F(x, y) =
/// E u_x(x, X_x)^2 u_x(y, X_y) (x >= y) under the Ghirlanda–Guerra law of
/// three replicas; `printed` receives (3/4) sum_{a,b} mu_a mu_b F(a v b, a ^ b).
double three_spin_closed_form(const ParisiMeasure& measure,
                              const std::function<double(std::size_t, std::size_t)>& F, double* printed = nullptr);

struct StateSample {
    int s = 1;
    double y = 0.0;
};

/// Draws from the density proportional to exp(s y) exp(-(y - f)^2 / (2 v)),
/// v = xi'(1) - xi'(q_*).
std::vector<StateSample> state_sample(double f, const PdeSolution& sol, std::size_t n, std::uint64_t seed);
std::vector<StateSample> state_sample(double f, double v, std::size_t n, std::uint64_t seed);

/// Fixed point of q = E tanh^2(h + z sqrt(xi'(q))).
double rs_fixed_point(const MixtureSpec& mixture, double h, double tol = 1e-14);

}  // namespace spinlab
