#include "spinlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spinlab/errors.hpp"

namespace spinlab {

GaussHermite::GaussHermite(std::size_t n) : nodes(n), weights(n) {
    if (n == 0 || n > 400) throw ConfigError("GaussHermite: need 1 <= n <= 400 nodes");
    // Golub–Welsch: eigenvalues of the Jacobi matrix of the probabilists'
    // Hermite recurrence, weights from the first eigenvector components.
    // Implicit QL tracks only the first row of the eigenvector matrix.
    std::vector<double> d(n, 0.0), e(n, 0.0), v(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) e[k - 1] = std::sqrt(static_cast<double>(k));
    v[0] = 1.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-16 * dd) break;
            }
            if (m != l) {
                if (++iter > 200) throw NumericalError("GaussHermite: QL iteration did not converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                std::size_t i = m;
                bool early = false;
                while (i-- > l) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        early = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    f = v[i + 1];
                    v[i + 1] = s * v[i] + c * f;
                    v[i] = c * v[i] - s * f;
                }
                if (early) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
    for (std::size_t i = 0; i < n; ++i) {
        nodes[i] = d[order[i]];
        weights[i] = v[order[i]] * v[order[i]];
    }
    // Symmetrize: the rule is exactly symmetric about 0.
    for (std::size_t i = 0; i < n / 2; ++i) {
        const double x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        const double w = 0.5 * (weights[i] + weights[n - 1 - i]);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = weights[n - 1 - i] = w;
    }
    if (n % 2) nodes[n / 2] = 0.0;
    double total = 0.0;
    for (double wi : weights) total += wi;
    if (std::abs(total - 1.0) > 1e-10) throw NumericalError("GaussHermite: weights do not sum to 1");
}

double gaussian_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double gamma_q(double a, double x) {
    if (x <= 0.0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int n = 0; n < 1000; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    // Continued fraction (modified Lentz).
    double b = x + 1.0 - a, c = 1.0 / 1e-300, d = 1.0 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

double chi_square_quantile(double alpha, int dof) {
    if (dof < 1 || !(alpha > 0.0 && alpha < 1.0)) throw DomainError("chi_square_quantile: bad arguments");
    double lo = 0.0, hi = 10.0 * dof + 100.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (gamma_q(0.5 * dof, 0.5 * mid) > alpha)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace spinlab
