#include "spinlab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spinlab/errors.hpp"

namespace spinlab {

MixtureSpec::MixtureSpec(std::vector<MixtureTerm> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw ConfigError("mixture: at least one term is required");
    bool any_positive = false;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        const auto& t = terms_[i];
        if (t.degree < 2) {
            std::ostringstream os;
            os << "mixture: degree " << t.degree << " < 2";
            throw ConfigError(os.str());
        }
        if (!(t.beta >= 0.0) || !std::isfinite(t.beta)) {
            std::ostringstream os;
            os << "mixture: coefficient for degree " << t.degree << " must be finite and >= 0";
            throw ConfigError(os.str());
        }
        if (i > 0 && terms_[i - 1].degree >= t.degree)
            throw ConfigError("mixture: degrees must be strictly increasing without duplicates");
        any_positive = any_positive || t.beta > 0.0;
    }
    if (!any_positive) throw ConfigError("mixture: at least one beta_p must be positive");
}

double MixtureSpec::xi(double x, int order) const {
    if (!(std::abs(x) <= 1.0)) {
        std::ostringstream os;
        os << "xi: argument " << x << " outside [-1, 1]";
        throw DomainError(os.str());
    }
    if (order < 0 || order > 2) throw DomainError("xi: order must be 0, 1 or 2");
    double sum = 0.0;
    for (const auto& t : terms_) {
        const double c = t.beta * t.beta;
        const int p = t.degree;
        switch (order) {
            case 0: sum += c * std::pow(x, p); break;
            case 1: sum += c * p * std::pow(x, p - 1); break;
            default: sum += c * p * (p - 1) * std::pow(x, p - 2); break;
        }
    }
    return sum;
}

double MixtureSpec::theta(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) {
        std::ostringstream os;
        os << "theta: argument " << t << " outside [0, 1]";
        throw DomainError(os.str());
    }
    return xi(t, 1) * t - xi(t, 0);
}

bool MixtureSpec::is_pure() const {
    return std::count_if(terms_.begin(), terms_.end(),
                         [](const MixtureTerm& t) { return t.beta > 0.0; }) == 1;
}

ParisiMeasure::ParisiMeasure(std::vector<Atom> atoms, double h) : atoms_(std::move(atoms)), h_(h) {
    if (atoms_.empty()) throw ConfigError("zeta: at least one atom is required");
    if (!std::isfinite(h_)) throw ConfigError("h must be finite");
    double total = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        const auto& a = atoms_[i];
        if (!(a.location >= 0.0 && a.location <= 1.0)) {
            std::ostringstream os;
            os << "zeta: atom location " << a.location << " outside [0, 1]";
            throw ConfigError(os.str());
        }
        if (!(a.mass > 0.0 && a.mass <= 1.0)) {
            std::ostringstream os;
            os << "zeta: atom mass " << a.mass << " outside (0, 1]";
            throw ConfigError(os.str());
        }
        if (i > 0 && !(atoms_[i - 1].location < a.location))
            throw ConfigError("zeta: atom locations must be strictly increasing");
        total += a.mass;
        cumulative_.push_back(total);
    }
    if (std::abs(total - 1.0) > mass_tolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "zeta: masses sum to " << total << ", not 1 (tolerance " << mass_tolerance << ")";
        throw ConfigError(os.str());
    }
    cumulative_.back() = 1.0;
}

double ParisiMeasure::cdf(double t) const {
    double m = 0.0;
    for (std::size_t i = 0; i < atoms_.size() && atoms_[i].location <= t; ++i) m = cumulative_[i];
    return m;
}

bool ParisiMeasure::is_atom(double t) const {
    return std::any_of(atoms_.begin(), atoms_.end(),
                       [t](const Atom& a) { return a.location == t; });
}

double drift_integral(const MixtureSpec& mixture, const ParisiMeasure& measure, double a,
                      double b) {
    if (!(a >= 0.0 && b <= 1.0 && a <= b)) throw DomainError("drift_integral: need 0 <= a <= b <= 1");
    // m is constant between consecutive knots.
    std::vector<double> knots{a};
    for (const auto& atom : measure.atoms())
        if (atom.location > a && atom.location < b) knots.push_back(atom.location);
    knots.push_back(b);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double m = measure.cdf(knots[i]);
        if (m > 0.0) total += m * (mixture.xi_prime(knots[i + 1]) - mixture.xi_prime(knots[i]));
    }
    return total;
}

std::vector<double> level_knots(const ParisiMeasure& measure) {
    std::vector<double> knots{0.0};
    for (const auto& a : measure.atoms())
        if (a.location > knots.back()) knots.push_back(a.location);
    return knots;
}

}  // namespace spinlab
