#pragma once

#include <cstdint>
#include <vector>

#include "spinlab/numerics.hpp"
#include "spinlab/parisi.hpp"

namespace spinlab {

/// C(q) = integral over [q, 1] of xi''(t) zeta([0, t]) dt.
double onsager_coefficient(const MixtureSpec& mixture, const ParisiMeasure& measure, double q);

struct TapCluster {
    double x_q = 0.0;       // local field of the cluster root at scale q
    Estimate s;             // <s>: mean tanh(X_1) over continuations
    Estimate y;             // <y>: mean X_1 over continuations
    double residual = 0.0;  // <s> - u_x(q, <y> - C <s>)
    double se = 0.0;        // delta-method standard error of the residual
    /// <y> - X_q - C <s> and its standard error.
    double drift_gap = 0.0;
    double drift_gap_se = 0.0;
};

struct TapReport {
    double q = 0.0;
    double onsager = 0.0;
    std::vector<TapCluster> clusters;
    /// Mean signed residual over clusters and its standard error.
    Estimate mean_residual;
    /// Sum of squared standardized residuals against its chi-square limit.
    double chi2 = 0.0;
    double chi2_limit = 0.0;
    std::size_t within_3se = 0;
    Estimate mean_drift_gap;
    bool pass = false;
};

struct TapOptions {
    std::size_t n_clusters = 50;
    std::size_t n_branches = 1000;
    int steps = 4000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

/// Conditional Monte Carlo check of the TAP identity at scale q: each
/// cluster root is a path simulated to q, continued by n_branches
/// independent paths to time 1. Passes when the mean residual is within
/// 3 standard errors and the standardized residuals are consistent with
/// noise (chi-square at the 0.999 level).
TapReport tap_check(const PdeSolution& sol, double q, const TapOptions& options);

/// Solves s = u_x(q, y - C s) by damped fixed-point iteration.
double tap_solve(const PdeSolution& sol, double q, double y, double C, double tol = 1e-13);

}  // namespace spinlab
