#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "spinlab/numerics.hpp"
#include "spinlab/parisi.hpp"
#include "spinlab/ultrametric.hpp"

namespace spinlab {

/// Transition kernel of one cascade level, tabulated for inverse-CDF draws.
///
/// Given the cumulative field s of the parent, the increment z has density
///   exp(c (upper(s + sigma z) - lower(s))) phi(z)
/// against the standard Gaussian; `lower` is the log-normalizer of `upper`,
/// so each row integrates to one. Rows live on a uniform s grid; a draw
/// picks one of the two neighbouring rows with the linear interpolation
/// weight, which samples the linearly interpolated density.
class KernelTable {
public:
    KernelTable(std::function<double(double)> upper, std::function<double(double)> lower, double exponent,
                double sigma, double s_lo, double s_hi, double ds = 0.05, std::size_t nz = 4096, double z_max = 8.0);

    double exponent() const { return exponent_; }
    double sigma() const { return sigma_; }
    /// Largest |integral - 1| over rows before renormalization.
    double max_normalization_error() const { return max_norm_error_; }
    /// Normalized density at (s, z) of the row nearest to s.
    double density(double s, double z) const;

    /// Draws z given the parent field s; throws DomainError outside the table.
    double sample(double s, Rng& rng) const;

    static constexpr double tolerance = 1e-6;
    static constexpr double hard_limit = 1e-4;

private:
    double exponent_, sigma_;
    double s_lo_, ds_;
    std::size_t ns_ = 0, nz_;
    double z_max_, dz_;
    std::vector<double> cdf_;  // ns_ rows of nz_ entries
    std::vector<double> pdf_;
    double max_norm_error_ = 0.0;
    bool gaussian_ = false;
};

/// Kernels for every level of the cascade (index d - 1 for depth d).
struct TiltKernels {
    std::vector<double> knots;
    std::vector<double> increments;  // sigma_d, d = 1..D
    std::vector<KernelTable> tables;
    double h = 0.0;
    double max_normalization_error() const;
};

TiltKernels build_tilt_kernels(const MixtureSpec& mixture, const ParisiMeasure& measure,
                               const ColeHopfLevels& levels);

/// Tilted node variables eta' on top of a base cascade.
struct TiltedCascade {
    const CascadeRealization* base = nullptr;
    std::vector<double> eta;    // per node; root entry unused
    std::vector<double> field;  // h + tilted path sum up to each node
};

TiltedCascade sample_tilted(const CascadeRealization& base, const TiltKernels& kernels, std::uint64_t seed);

/// h + sum of tilted increments along the path to a leaf.
double tilted_field(const TiltedCascade& tc, std::size_t leaf);

/// Tilted field at the end of one root-to-leaf path, drawn level by level.
double sample_tilted_path(const TiltKernels& kernels, Rng& rng);

/// Both sides of the weight-tilting identity.
struct TiltingReport {
    std::size_t n_sites = 0;
    std::size_t n_samples = 0;
    std::size_t truncation = 0;
    /// E sum_a w'_a prod_i tanh(g_i(h_a)) with w' proportional to
    /// w prod_i cosh(g_i(h_a)); equivalently the per-realization ratio form.
    Estimate reweighted;
    /// E sum_a w_a prod_i tanh(g'_i(h_a)).
    Estimate tilted;
    double z = 0.0;
    bool pass = false;
    double max_tail_mass = 0.0;
    double max_normalization_error = 0.0;
};

struct TiltingOptions {
    std::size_t n_sites = 1;
    std::size_t n_samples = 20000;
    std::size_t truncation = 200;
    std::size_t batches = 30;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

TiltingReport tilting_identity_check(const MixtureSpec& mixture, const ParisiMeasure& measure,
                                     const ColeHopfLevels& levels, const TiltingOptions& options);

/// Raw moments 1..4 of (tilted leaf field - h) against those of
/// (X_{q_*} - h) from the coupled SDE.
struct LawEquivalenceReport {
    std::size_t n_samples = 0;
    std::array<Estimate, 4> tilted{};
    std::array<Estimate, 4> sde{};
    std::array<double, 4> z{};
    bool pass = false;
};

LawEquivalenceReport law_equivalence_check(const PdeSolution& sol, const ColeHopfLevels& levels,
                                           std::size_t n_samples, int steps, std::uint64_t seed,
                                           unsigned threads = 1);

}  // namespace spinlab
