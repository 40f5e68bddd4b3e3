#pragma once

#include <cstddef>
#include <vector>

namespace spinlab {

/// Gauss–Hermite rule for the standard Gaussian measure:
/// sum_i weight[i] f(node[i]) ~ integral f(z) dgamma(z).
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussHermite(std::size_t n);

    template <typename F>
    double integrate(F&& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
        return s;
    }
};

/// Standard normal density.
double gaussian_pdf(double z);

/// Upper quantile of the chi-square distribution with `dof` degrees of
/// freedom at tail probability `alpha`, by bisection on Q(dof/2, x/2).
double chi_square_quantile(double alpha, int dof);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

}  // namespace spinlab
