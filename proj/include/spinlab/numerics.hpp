#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace spinlab {

/// Thomas algorithm for a tridiagonal system. `lower[0]` and
/// `upper[n-1]` are ignored. Solves in place into `rhs`.
inline void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                              std::span<const double> upper, std::span<double> rhs,
                              std::vector<double>& scratch) {
    const std::size_t n = diag.size();
    scratch.resize(n);
    double beta = diag[0];
    rhs[0] /= beta;
    for (std::size_t i = 1; i < n; ++i) {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i + 1] * rhs[i + 1];
}

/// Values on a uniform grid [lo, hi] with cubic (Catmull–Rom) interpolation
/// inside and linear extrapolation outside using fixed asymptotic slopes.
class UniformTable {
public:
    UniformTable() = default;
    UniformTable(double lo, double hi, std::vector<double> values, double slope_lo = 0.0,
                 double slope_hi = 0.0)
        : lo_(lo), hi_(hi), dx_((hi - lo) / static_cast<double>(values.size() - 1)),
          values_(std::move(values)), slope_lo_(slope_lo), slope_hi_(slope_hi) {}

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double dx() const { return dx_; }
    std::size_t size() const { return values_.size(); }
    double x(std::size_t i) const { return lo_ + dx_ * static_cast<double>(i); }
    std::span<const double> values() const { return values_; }

    double operator()(double x) const {
        if (x <= lo_) return values_.front() + slope_lo_ * (x - lo_);
        if (x >= hi_) return values_.back() + slope_hi_ * (x - hi_);
        const double pos = (x - lo_) / dx_;
        std::size_t i = static_cast<std::size_t>(pos);
        const std::size_t n = values_.size();
        if (i >= n - 1) i = n - 2;
        const double t = pos - static_cast<double>(i);
        const double p1 = values_[i], p2 = values_[i + 1];
        const double p0 = i > 0 ? values_[i - 1] : 2.0 * p1 - p2;
        const double p3 = i + 2 < n ? values_[i + 2] : 2.0 * p2 - p1;
        return p1 + 0.5 * t *
                        (p2 - p0 +
                         t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
    }

private:
    double lo_ = 0.0, hi_ = 1.0, dx_ = 1.0;
    std::vector<double> values_;
    double slope_lo_ = 0.0, slope_hi_ = 0.0;
};

/// Running mean and variance (Welford).
class MeanAccumulator {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double std_error() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0, m2_ = 0.0;
};

/// Estimate with its Monte Carlo standard error.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Batch-means estimate: the mean of per-batch means with the standard
/// error taken from the spread of the batch means.
inline Estimate batch_means(std::span<const double> batch_values) {
    MeanAccumulator acc;
    for (double v : batch_values) acc.add(v);
    return {acc.mean(), acc.std_error()};
}

/// |a - b| in units of their combined standard error.
inline double z_score(const Estimate& a, const Estimate& b) {
    const double se = std::hypot(a.std_error, b.std_error);
    if (se == 0.0) return a.value == b.value ? 0.0 : INFINITY;
    return std::abs(a.value - b.value) / se;
}

}  // namespace spinlab
