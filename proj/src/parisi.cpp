#include "spinlab/parisi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "spinlab/errors.hpp"
#include "spinlab/quadrature.hpp"

namespace spinlab {

double log_cosh(double x) {
    const double a = std::abs(x);
    return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

PdeGrid default_grid(const MixtureSpec& mixture, const ParisiMeasure& measure) {
    PdeGrid grid;
    const double h = std::abs(measure.h());
    const double spread = mixture.xi_prime(1.0);
    grid.x_halfwidth = std::max(8.0 + h, h + spread + 7.0 * std::sqrt(spread));
    const int half = static_cast<int>(std::ceil(grid.x_halfwidth / 0.01 - 1e-9));
    grid.nx = 2 * half + 1;
    grid.time_knots = {0.0, 1.0};
    for (const auto& a : measure.atoms()) grid.time_knots.push_back(a.location);
    std::sort(grid.time_knots.begin(), grid.time_knots.end());
    grid.time_knots.erase(std::unique(grid.time_knots.begin(), grid.time_knots.end()),
                          grid.time_knots.end());
    return grid;
}

void validate_grid(const PdeGrid& grid, const ParisiMeasure& measure) {
    std::ostringstream os;
    if (!(grid.x_halfwidth >= 6.0 + std::abs(measure.h())))
        os << "grid: x_halfwidth L = " << grid.x_halfwidth << " must be >= 6 + |h|";
    else if (grid.nx < 401 || grid.nx % 2 == 0)
        os << "grid: nx = " << grid.nx << " must be odd and >= 401";
    else if (!(grid.dt_max > 0.0))
        os << "grid: dt_max must be positive";
    else if (grid.dt_max > 0.5)
        // Explicit u_x^2 term with implicit diffusion: step bound 2D/c^2 = 1 with |u_x| < 1.
        os << "grid: dt_max = " << grid.dt_max << " violates the step bound 0.5 of the semi-implicit scheme";
    else if (grid.n_slices < 10)
        os << "grid: n_slices must be >= 10";
    else if (!(grid.plateau_tolerance > 0.0))
        os << "grid: plateau_tolerance must be positive";
    else if (grid.time_knots.empty() || grid.time_knots.front() != 0.0 || grid.time_knots.back() != 1.0)
        os << "grid: time knots must start at 0 and end at 1";
    else if (!std::is_sorted(grid.time_knots.begin(), grid.time_knots.end()))
        os << "grid: time knots must be sorted";
    else
        for (const auto& a : measure.atoms())
            if (!std::binary_search(grid.time_knots.begin(), grid.time_knots.end(), a.location)) {
                os << "grid: atom location " << a.location << " is not a time knot";
                break;
            }
    if (!os.str().empty()) throw ConfigError(os.str());
}

PdeSolution::PdeSolution(PdeGrid grid, MixtureSpec mixture, ParisiMeasure measure,
                         std::vector<double> times, std::vector<double> u, std::vector<double> ux)
    : grid_(std::move(grid)), mixture_(std::move(mixture)), measure_(std::move(measure)),
      times_(std::move(times)), u_(std::move(u)), ux_(std::move(ux)) {}

std::size_t PdeSolution::slice_index(double t) const {
    auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it != times_.end() && *it == t) return static_cast<std::size_t>(it - times_.begin());
    return npos;
}

TimeSlice PdeSolution::locate(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) {
        std::ostringstream os;
        os << "query: time " << t << " outside [0, 1]";
        throw DomainError(os.str());
    }
    auto it = std::lower_bound(times_.begin(), times_.end(), t);
    const auto k = static_cast<std::size_t>(it - times_.begin());
    if (*it == t) return {k, k, 0.0};
    return {k - 1, k, (t - times_[k - 1]) / (times_[k] - times_[k - 1])};
}

double PdeSolution::interp(const std::vector<double>& field, const TimeSlice& slice, double x) const {
    const double L = grid_.x_halfwidth;
    if (!(std::abs(x) <= L)) {
        std::ostringstream os;
        os << "query: |x| = " << std::abs(x) << " exceeds the grid half-width L = " << L
           << "; enlarge L";
        throw DomainError(os.str());
    }
    const std::size_t n = nx();
    const double pos = (x + L) / grid_.dx();
    std::size_t j = static_cast<std::size_t>(pos);
    if (j >= n - 1) j = n - 2;
    const double w = pos - static_cast<double>(j);
    const double* lo = field.data() + slice.lower * n + j;
    const double a = lo[0] + w * (lo[1] - lo[0]);
    if (slice.weight == 0.0) return a;
    const double* hi = field.data() + slice.upper * n + j;
    const double b = hi[0] + w * (hi[1] - hi[0]);
    return a + slice.weight * (b - a);
}

double PdeSolution::ux(const TimeSlice& slice, double x) const { return interp(ux_, slice, x); }

double PdeSolution::u(double t, double x) const { return interp(u_, locate(t), x); }

double PdeSolution::uxx(double t, double x) const {
    const double dx = grid_.dx();
    const double L = grid_.x_halfwidth;
    const double a = std::max(-L, x - dx), b = std::min(L, x + dx);
    const TimeSlice s = locate(t);
    return (interp(ux_, s, b) - interp(ux_, s, a)) / (b - a);
}

double plateau_error(const PdeSolution& sol) {
    double err = 0.0;
    const auto times = sol.times();
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < sol.measure().q_star()) continue;
        const auto g = sol.ux_slice(k);
        for (std::size_t j = 0; j < sol.nx(); ++j) err = std::max(err, std::abs(g[j] - std::tanh(sol.x(j))));
    }
    return err;
}

double query_ux(const PdeSolution& sol, double t, double x) {
    constexpr double cap = 1.0 - 1e-12;
    return std::clamp(sol.ux(t, x), -cap, cap);
}

namespace {

// Slice times: uniform grid of n_slices intervals merged with the knots.
std::vector<double> slice_times(const PdeGrid& grid) {
    std::vector<double> times;
    for (int k = 0; k <= grid.n_slices; ++k) times.push_back(static_cast<double>(k) / grid.n_slices);
    for (double t : grid.time_knots) times.push_back(t);
    std::sort(times.begin(), times.end());
    std::vector<double> merged;
    for (double t : times) {
        if (!merged.empty() && t - merged.back() < 1e-9) {
            // Knots win over nearby uniform times so atoms stay exact.
            if (std::binary_search(grid.time_knots.begin(), grid.time_knots.end(), t)) merged.back() = t;
            continue;
        }
        merged.push_back(t);
    }
    return merged;
}

void fill_ux(std::span<const double> u, std::span<double> ux, double dx) {
    const std::size_t n = u.size();
    // Far out |u_x| sits within rounding of 1; overshoots of that size are
    // pulled back inside (-1, 1), larger ones are left for the invariant check.
    constexpr double below_one = 1.0 - std::numeric_limits<double>::epsilon() / 2;
    for (std::size_t j = 1; j + 1 < n; ++j) {
        double g = (u[j + 1] - u[j - 1]) / (2.0 * dx);
        const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(u[j + 1]) / dx;
        if (std::abs(g) >= 1.0 && std::abs(g) - 1.0 <= slack) g = std::copysign(below_one, g);
        ux[j] = g;
    }
    // Boundary nodes by linear extrapolation, kept strictly inside (-1, 1).
    const double right = 2.0 * ux[n - 2] - ux[n - 3];
    const double left = 2.0 * ux[1] - ux[2];
    ux[n - 1] = std::min({right, 0.5 * (1.0 + ux[n - 2]), below_one});
    ux[0] = std::max({left, 0.5 * (-1.0 + ux[1]), -below_one});
}

}  // namespace

PdeSolution solve_pde(const MixtureSpec& mixture, const ParisiMeasure& measure, const PdeGrid& grid) {
    validate_grid(grid, measure);
    const std::size_t n = static_cast<std::size_t>(grid.nx);
    const double L = grid.x_halfwidth;
    const double dx = grid.dx();
    const std::vector<double> times = slice_times(grid);
    const std::size_t nt = times.size();

    std::vector<double> u(nt * n), ux(nt * n);
    auto u_at = [&](std::size_t k) { return std::span<double>(u.data() + k * n, n); };
    auto ux_at = [&](std::size_t k) { return std::span<double>(ux.data() + k * n, n); };

    {
        auto top = u_at(nt - 1);
        for (std::size_t j = 0; j < n; ++j) top[j] = log_cosh(-L + dx * static_cast<double>(j));
        fill_ux(top, ux_at(nt - 1), dx);
    }

    std::vector<double> cur(u_at(nt - 1).begin(), u_at(nt - 1).end());
    std::vector<double> rhs(n), lower(n), diag(n), upper(n), scratch;
    for (std::size_t k = nt - 1; k-- > 0;) {
        const double ta = times[k], tb = times[k + 1];
        const double span_s = mixture.xi_prime(tb) - mixture.xi_prime(ta);
        const double m = measure.cdf(ta);
        if (span_s > 0.0) {
            const auto steps = static_cast<std::size_t>(std::ceil(span_s / grid.dt_max - 1e-12));
            const double ds = span_s / static_cast<double>(steps);
            const double r = ds / (dx * dx);
            for (std::size_t j = 0; j < n; ++j) {
                lower[j] = -0.5 * r;
                diag[j] = 1.0 + r;
                upper[j] = -0.5 * r;
            }
            upper[0] = -r;
            lower[n - 1] = -r;
            for (std::size_t step = 0; step < steps; ++step) {
                rhs[0] = cur[0] + 0.5 * ds * m + ds / dx;
                rhs[n - 1] = cur[n - 1] + 0.5 * ds * m + ds / dx;
                for (std::size_t j = 1; j + 1 < n; ++j) {
                    const double g = (cur[j + 1] - cur[j - 1]) / (2.0 * dx);
                    rhs[j] = cur[j] + 0.5 * ds * m * g * g;
                }
                solve_tridiagonal(lower, diag, upper, rhs, scratch);
                cur.swap(rhs);
            }
        }
        std::copy(cur.begin(), cur.end(), u_at(k).begin());
        fill_ux(u_at(k), ux_at(k), dx);
    }

    // Invariants.
    const double q_star = measure.q_star();
    double plateau_error = 0.0;
    for (std::size_t k = 0; k < nt; ++k) {
        auto g = ux_at(k);
        for (std::size_t j = 0; j < n; ++j) {
            if (!(std::abs(g[j]) < 1.0) || !std::isfinite(g[j])) {
                std::ostringstream os;
                os << "solve_pde: invariant |u_x| < 1 violated at t = " << times[k]
                   << ", x = " << -L + dx * static_cast<double>(j) << " (u_x - sign = " << g[j] - std::copysign(1.0, g[j]) << ")";
                throw NumericalError(os.str());
            }
            // Strict growth wherever the increment is resolvable in double precision.
            if (j > 0 && !(g[j] > g[j - 1]) && (1.0 - std::abs(g[j]) > 1e-10 || g[j] < g[j - 1] - 1e-12)) {
                std::ostringstream os;
                os << "solve_pde: invariant 'u_x strictly increasing in x' violated at t = "
                   << times[k] << ", x = " << -L + dx * static_cast<double>(j);
                throw NumericalError(os.str());
            }
        }
        if (times[k] >= q_star)
            for (std::size_t j = 0; j < n; ++j)
                plateau_error = std::max(plateau_error, std::abs(g[j] - std::tanh(-L + dx * static_cast<double>(j))));
    }
    if (plateau_error > grid.plateau_tolerance) {
        std::ostringstream os;
        os << "solve_pde: plateau invariant max|u_x - tanh| = " << plateau_error
           << " exceeds " << grid.plateau_tolerance << " for t >= q_*";
        throw NumericalError(os.str());
    }
    return PdeSolution(grid, mixture, measure, times, std::move(u), std::move(ux));
}

FieldGrid default_field_grid(const PdeGrid& grid) {
    FieldGrid fg;
    fg.hi = grid.x_halfwidth + 4.0;
    fg.lo = -fg.hi;
    fg.n = static_cast<std::size_t>(std::ceil((fg.hi - fg.lo) / 0.005)) + 1;
    return fg;
}

UniformTable cole_hopf_step(const UniformTable& upper, double exponent, double sigma,
                            const FieldGrid& grid, const GaussHermite& rule) {
    if (!(exponent >= 0.0 && exponent <= 1.0)) throw DomainError("cole_hopf_step: exponent outside [0, 1]");
    std::vector<double> values(grid.n);
    const double dx = (grid.hi - grid.lo) / static_cast<double>(grid.n - 1);
    std::vector<double> z(rule.nodes.size());
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double s = grid.lo + dx * static_cast<double>(i);
        if (sigma == 0.0) {
            values[i] = upper(s);
            continue;
        }
        if (exponent == 0.0) {
            values[i] = rule.integrate([&](double zz) { return upper(s + sigma * zz); });
            continue;
        }
        double zmax = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < z.size(); ++k) {
            z[k] = exponent * upper(s + sigma * rule.nodes[k]);
            zmax = std::max(zmax, z[k]);
        }
        double acc = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) acc += rule.weights[k] * std::exp(z[k] - zmax);
        if (!(acc > 0.0) || !std::isfinite(acc))
            throw NumericalError("cole_hopf_step: quadrature did not produce a finite positive sum");
        values[i] = (zmax + std::log(acc)) / exponent;
    }
    return UniformTable(grid.lo, grid.hi, std::move(values), -1.0, 1.0);
}

ColeHopfLevels cole_hopf_levels(const MixtureSpec& mixture, const ParisiMeasure& measure,
                                const FieldGrid& grid, std::size_t gh_nodes) {
    if (grid.n < 16 || !(grid.hi > grid.lo)) throw ConfigError("cole_hopf_levels: field grid too small");
    const GaussHermite rule(gh_nodes);
    ColeHopfLevels out;
    out.knots = level_knots(measure);
    const std::size_t r = out.knots.size() - 1;
    for (std::size_t k = 0; k < r; ++k) {
        out.exponents.push_back(measure.cdf(out.knots[k]));
        const double var = mixture.xi_prime(out.knots[k + 1]) - mixture.xi_prime(out.knots[k]);
        out.increments.push_back(std::sqrt(std::max(0.0, var)));
    }
    // Terminal level: log cosh smoothed by the Gaussian over [q_*, 1] at exponent 1.
    const double top_shift = 0.5 * (mixture.xi_prime(1.0) - mixture.xi_prime(measure.q_star()));
    const double dx = (grid.hi - grid.lo) / static_cast<double>(grid.n - 1);
    std::vector<double> top(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) top[i] = log_cosh(grid.lo + dx * static_cast<double>(i)) + top_shift;
    out.levels.resize(r + 1);
    out.levels[r] = UniformTable(grid.lo, grid.hi, std::move(top), -1.0, 1.0);
    for (std::size_t k = r; k-- > 0;)
        out.levels[k] = cole_hopf_step(out.levels[k + 1], out.exponents[k], out.increments[k], grid, rule);
    return out;
}

void write_solution_csv(const PdeSolution& sol, std::ostream& out) {
    out << "t,x,u,ux\n";
    char buf[128];
    const auto times = sol.times();
    for (std::size_t k = 0; k < times.size(); ++k) {
        const auto u = sol.u_slice(k);
        const auto ux = sol.ux_slice(k);
        for (std::size_t j = 0; j < sol.nx(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", times[k], sol.x(j), u[j], ux[j]);
            out << buf;
        }
    }
}

void write_solution_binary(const PdeSolution& sol, std::ostream& out) {
    // Layout: magic "SPNPDE01", uint64 nt, uint64 nx, then times[nt], x[nx],
    // u[nt*nx], ux[nt*nx] as little-endian IEEE doubles.
    out.write("SPNPDE01", 8);
    const std::uint64_t nt = sol.times().size(), nx = sol.nx();
    out.write(reinterpret_cast<const char*>(&nt), sizeof nt);
    out.write(reinterpret_cast<const char*>(&nx), sizeof nx);
    out.write(reinterpret_cast<const char*>(sol.times().data()), static_cast<std::streamsize>(nt * sizeof(double)));
    std::vector<double> xs(nx);
    for (std::size_t j = 0; j < nx; ++j) xs[j] = sol.x(j);
    out.write(reinterpret_cast<const char*>(xs.data()), static_cast<std::streamsize>(nx * sizeof(double)));
    for (std::size_t k = 0; k < nt; ++k)
        out.write(reinterpret_cast<const char*>(sol.u_slice(k).data()), static_cast<std::streamsize>(nx * sizeof(double)));
    for (std::size_t k = 0; k < nt; ++k)
        out.write(reinterpret_cast<const char*>(sol.ux_slice(k).data()), static_cast<std::streamsize>(nx * sizeof(double)));
}

}  // namespace spinlab
