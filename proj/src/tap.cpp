#include "spinlab/tap.hpp"

#include <cmath>
#include <sstream>

#include "spinlab/diffusion.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/quadrature.hpp"

namespace spinlab {

double onsager_coefficient(const MixtureSpec& mixture, const ParisiMeasure& measure, double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("onsager: q outside [0, 1]");
    return drift_integral(mixture, measure, q, 1.0);
}

TapReport tap_check(const PdeSolution& sol, double q, const TapOptions& opt) {
    const auto& measure = sol.measure();
    if (!(q >= 0.0 && q <= measure.q_star())) throw ConfigError("tap-check: q must lie in [0, q_*]");
    if (opt.n_branches < 1000) throw ConfigError("tap-check: n_branches must be at least 1000");
    if (opt.n_clusters < 2) throw ConfigError("tap-check: need at least two clusters");
    const double C = onsager_coefficient(sol.mixture(), measure, q);
    const double q_arr[] = {q};
    const TimeGrid grid = make_time_grid(measure, opt.steps, q_arr);
    PathEngine engine(sol, grid);
    const std::size_t kq = grid.index_of(q), kend = grid.size() - 1;
    const auto knots = level_knots(measure);

    Ensemble roots(opt.n_clusters, 1, measure.h());
    ClusterPlan root_plan(knots, 1);
    root_plan.add_independent(opt.n_clusters);
    engine.advance(roots, root_plan, 0, kq, opt.seed, "tap-roots", {}, {}, opt.threads);

    const std::size_t nb = opt.n_branches;
    Ensemble br(opt.n_clusters * nb, 1, 0.0);
    for (std::size_t c = 0; c < opt.n_clusters; ++c)
        for (std::size_t p = c * nb; p < (c + 1) * nb; ++p) {
            br.B[p] = roots.B[c];
            br.Y[p] = roots.Y[c];
            br.X[p] = roots.X[c];
        }
    ClusterPlan plan(knots, 1);
    plan.add_independent(br.n);
    engine.advance(br, plan, kq, kend, opt.seed, "tap-branches", {}, {}, opt.threads);

    TapReport rep;
    rep.q = q;
    rep.onsager = C;
    double sum_res = 0.0, sum_var = 0.0, gap_sum = 0.0, gap_var = 0.0;
    for (std::size_t c = 0; c < opt.n_clusters; ++c) {
        MeanAccumulator s, y;
        for (std::size_t p = c * nb; p < (c + 1) * nb; ++p) {
            s.add(std::tanh(br.X[p]));
            y.add(br.X[p]);
        }
        TapCluster cl;
        cl.x_q = roots.X[c];
        cl.s = {s.mean(), s.std_error()};
        cl.y = {y.mean(), y.std_error()};
        const double arg = cl.y.value - C * cl.s.value;
        cl.residual = cl.s.value - sol.ux(q, arg);
        const double slope = sol.uxx(q, arg);
        MeanAccumulator lin, gap;
        for (std::size_t p = c * nb; p < (c + 1) * nb; ++p) {
            const double t = std::tanh(br.X[p]);
            lin.add(t - slope * (br.X[p] - C * t));
            gap.add(br.X[p] - C * t);
        }
        cl.se = lin.std_error();
        cl.drift_gap = gap.mean() - cl.x_q;
        cl.drift_gap_se = gap.std_error();
        sum_res += cl.residual;
        sum_var += cl.se * cl.se;
        gap_sum += cl.drift_gap;
        gap_var += cl.drift_gap_se * cl.drift_gap_se;
        if (cl.se > 0.0) rep.chi2 += (cl.residual / cl.se) * (cl.residual / cl.se);
        if (std::abs(cl.residual) <= 3.0 * cl.se) ++rep.within_3se;
        rep.clusters.push_back(cl);
    }
    const double n = static_cast<double>(opt.n_clusters);
    rep.mean_residual = {sum_res / n, std::sqrt(sum_var) / n};
    rep.mean_drift_gap = {gap_sum / n, std::sqrt(gap_var) / n};
    rep.chi2_limit = chi_square_quantile(1e-3, static_cast<int>(opt.n_clusters));
    rep.pass = std::abs(rep.mean_residual.value) <= 3.0 * rep.mean_residual.std_error && rep.chi2 <= rep.chi2_limit;
    return rep;
}

double tap_solve(const PdeSolution& sol, double q, double y, double C, double tol) {
    if (C < 0.0) throw DomainError("tap solve: negative Onsager coefficient");
    const double lambda = 1.0 / (1.0 + C);
    double s = 0.0;
    for (int it = 0; it < 100000; ++it) {
        const double next = (1.0 - lambda) * s + lambda * sol.ux(q, y - C * s);
        if (std::abs(next - s) <= tol) return next;
        s = next;
    }
    throw NumericalError("tap solve: iteration did not converge");
}

}  // namespace spinlab
