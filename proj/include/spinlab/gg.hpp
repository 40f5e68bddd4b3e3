#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "spinlab/expr.hpp"
#include "spinlab/mixture.hpp"
#include "spinlab/numerics.hpp"

namespace spinlab {

enum class OverlapSampler { exact, cascade };

struct GgOptions {
    std::size_t n_samples = 100000;
    std::size_t batches = 30;
    OverlapSampler sampler = OverlapSampler::exact;
    /// Cascade route only: truncation and number of arrays drawn per realization.
    std::size_t truncation = 200;
    std::size_t arrays_per_cascade = 100;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

/// Test functions. `f` is over overlap entries R(i,j) of n replicas and `g`
/// over x = R(1,n+1) for the identity itself; `pair` is g(x, y) with
/// x = R12, y = R13; `triple` is f(x, y, z) with (x, y, z) = (R12, R13, R23).
struct GgFunctions {
    std::optional<Expression> f;
    std::optional<Expression> g;
    std::size_t n = 0;  // replicas of f; 0 means f.max_replica()
    std::optional<Expression> pair;
    std::optional<Expression> triple;
};

struct IdentityCheck {
    std::string name;
    Estimate lhs;
    Estimate rhs;
    Estimate difference;
    bool applicable = true;
    bool pass = false;
    /// Right side evaluated exactly from the atoms (NaN when not available).
    double rhs_exact = std::numeric_limits<double>::quiet_NaN();
    /// Right side in the printed coefficient form where it differs from the
    /// one tested (NaN otherwise).
    double rhs_printed = std::numeric_limits<double>::quiet_NaN();
    bool printed_consistent = true;
    std::string note;
};

struct GgReport {
    std::vector<IdentityCheck> checks;
    std::size_t n_samples = 0;
    /// Largest truncation tail-mass estimate seen (cascade route only).
    double max_tail_mass = 0.0;
    bool pass() const;
};

GgReport gg_check(const ParisiMeasure& measure, const GgFunctions& functions, const GgOptions& options);

/// Exact double integral of g(x, y) against zeta x zeta.
double integrate_pair(const ParisiMeasure& measure, const Expression& g);
/// Exact integral of g(x, x) against zeta.
double integrate_diagonal(const ParisiMeasure& measure, const Expression& g);

}  // namespace spinlab
