#pragma once

#include <span>
#include <vector>

namespace spinlab {

/// One monomial of the mixture: beta_p^2 x^p.
struct MixtureTerm {
    int degree = 2;
    double beta = 0.0;
};

/// Model function xi(x) = sum_p beta_p^2 x^p and its derivatives.
///
/// Degrees are strictly increasing, every degree is at least 2, every
/// coefficient is nonnegative and at least one is positive. The object is
/// immutable once constructed.
class MixtureSpec {
public:
    explicit MixtureSpec(std::vector<MixtureTerm> terms);

    /// xi (order 0), xi' (order 1) or xi'' (order 2) at x in [-1, 1].
    double xi(double x, int order = 0) const;
    double xi_prime(double x) const { return xi(x, 1); }
    double xi_second(double x) const { return xi(x, 2); }

    /// theta(t) = xi'(t) t - xi(t) for t in [0, 1].
    double theta(double t) const;

    std::span<const MixtureTerm> terms() const { return terms_; }
    int max_degree() const { return terms_.back().degree; }
    /// True when a single degree carries all the weight.
    bool is_pure() const;

private:
    std::vector<MixtureTerm> terms_;
};

/// An atom of the Parisi measure.
struct Atom {
    double location = 0.0;
    double mass = 0.0;
};

/// Finite atomic probability measure zeta on [0, 1] together with the
/// external field h every downstream process starts from.
class ParisiMeasure {
public:
    ParisiMeasure(std::vector<Atom> atoms, double h);

    /// m(t) = zeta([0, t]); right-continuous step function.
    double cdf(double t) const;

    /// q_* = sup supp zeta.
    double q_star() const { return atoms_.back().location; }
    double h() const { return h_; }
    std::span<const Atom> atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }

    /// Cumulative masses c_k = m(q_k), k = 1..r (c_r == 1 exactly).
    std::span<const double> cumulative() const { return cumulative_; }

    /// True when t coincides with an atom location.
    bool is_atom(double t) const;

    static constexpr double mass_tolerance = 1e-12;

private:
    std::vector<Atom> atoms_;
    std::vector<double> cumulative_;
    double h_ = 0.0;
};

/// Overlap levels {0} U atoms, sorted and without duplicates. Level k of
/// every cascade or Cole–Hopf recursion sits at knots[k].
std::vector<double> level_knots(const ParisiMeasure& measure);

/// Exact integral of xi''(t) m(t) over [a, b] (piecewise xi' increments).
double drift_integral(const MixtureSpec& mixture, const ParisiMeasure& measure, double a,
                      double b);

}  // namespace spinlab
