#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "spinlab/mixture.hpp"
#include "spinlab/numerics.hpp"

namespace spinlab {

/// Space-time grid for the backward Parisi solve.
///
/// The solver marches in the variable s = xi'(t); `dt_max` bounds each step
/// in that variable. Solutions are stored on `n_slices` uniform time slices
/// plus every time knot.
struct PdeGrid {
    double x_halfwidth = 8.0;
    int nx = 1601;
    double dt_max = 1e-4;
    int n_slices = 1000;
    double plateau_tolerance = 1e-4;
    /// Sorted union of {0, 1} and the atom locations.
    std::vector<double> time_knots;

    double dx() const { return 2.0 * x_halfwidth / (nx - 1); }
};

/// Default grid: L wide enough that local-field paths stay inside it with
/// overwhelming probability, dx = 0.01, dt_max = 1e-4.
PdeGrid default_grid(const MixtureSpec& mixture, const ParisiMeasure& measure);

/// Throws ConfigError when the grid is unusable for `measure`.
void validate_grid(const PdeGrid& grid, const ParisiMeasure& measure);

/// Precomputed lookup of a time slice pair and its interpolation weight.
struct TimeSlice {
    std::size_t lower = 0;
    std::size_t upper = 0;
    double weight = 0.0;  // weight of `upper`
};

/// Gridded solution u, u_x of the Parisi initial value problem.
class PdeSolution {
public:
    PdeSolution(PdeGrid grid, MixtureSpec mixture, ParisiMeasure measure, std::vector<double> times,
                std::vector<double> u, std::vector<double> ux);

    const PdeGrid& grid() const { return grid_; }
    const MixtureSpec& mixture() const { return mixture_; }
    const ParisiMeasure& measure() const { return measure_; }

    std::span<const double> times() const { return times_; }
    std::size_t nx() const { return static_cast<std::size_t>(grid_.nx); }
    double x(std::size_t j) const { return -grid_.x_halfwidth + grid_.dx() * static_cast<double>(j); }
    std::span<const double> u_slice(std::size_t k) const { return {u_.data() + k * nx(), nx()}; }
    std::span<const double> ux_slice(std::size_t k) const { return {ux_.data() + k * nx(), nx()}; }
    /// Index of the stored slice at exactly time t, or npos.
    std::size_t slice_index(double t) const;

    TimeSlice locate(double t) const;
    /// Bilinear interpolation of u_x; throws DomainError for |x| > L.
    double ux(const TimeSlice& slice, double x) const;
    double ux(double t, double x) const { return ux(locate(t), x); }
    double u(double t, double x) const;
    /// Spatial derivative of u_x by central differences of the stored slices.
    double uxx(double t, double x) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    double interp(const std::vector<double>& field, const TimeSlice& slice, double x) const;

    PdeGrid grid_;
    MixtureSpec mixture_;
    ParisiMeasure measure_;
    std::vector<double> times_;
    std::vector<double> u_;
    std::vector<double> ux_;
};

/// Backward semi-implicit finite-difference solve of
///   u_t + xi''(t)/2 (u_xx + zeta([0,t]) u_x^2) = 0,  u(1, x) = log cosh x.
/// Diffusion is implicit (tridiagonal), the u_x^2 term explicit, Neumann
/// u_x = +-1 at x = +-L. Throws NumericalError naming any violated
/// solution invariant.
PdeSolution solve_pde(const MixtureSpec& mixture, const ParisiMeasure& measure, const PdeGrid& grid);

/// max |u_x(t, x) - tanh(x)| over stored slices with t >= q_*.
double plateau_error(const PdeSolution& sol);

/// u_x(t, x) clamped to (-1 + 1e-12, 1 - 1e-12).
double query_ux(const PdeSolution& sol, double t, double x);

/// Numerically stable log cosh.
double log_cosh(double x);

/// Cole–Hopf level functions Z_0..Z_r on the cumulative field s, with
/// Z_k(s) = u(knots[k], s).
struct ColeHopfLevels {
    /// level_knots(measure).
    std::vector<double> knots;
    /// exponents[k] = m(q_k), used on the step from level k+1 down to k.
    std::vector<double> exponents;
    /// Standard deviation of the Gaussian increment between levels k and k+1.
    std::vector<double> increments;
    std::vector<UniformTable> levels;

    std::size_t depth() const { return levels.size() - 1; }
    double operator()(std::size_t level, double s) const { return levels[level](s); }
};

/// Evaluation grid for the level functions.
struct FieldGrid {
    double lo = -14.0;
    double hi = 14.0;
    std::size_t n = 5601;
};

FieldGrid default_field_grid(const PdeGrid& grid);

/// One Cole–Hopf step: (1/m) log E exp(m Z(s + sigma z)), or E Z(s + sigma z)
/// when m == 0.
UniformTable cole_hopf_step(const UniformTable& upper, double exponent, double sigma,
                            const FieldGrid& grid, const class GaussHermite& rule);

ColeHopfLevels cole_hopf_levels(const MixtureSpec& mixture, const ParisiMeasure& measure,
                                const FieldGrid& grid, std::size_t gh_nodes = 96);

/// Writers used by `solve-pde --out`.
void write_solution_csv(const PdeSolution& sol, std::ostream& out);
void write_solution_binary(const PdeSolution& sol, std::ostream& out);

}  // namespace spinlab
