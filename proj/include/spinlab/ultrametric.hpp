#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "spinlab/mixture.hpp"
#include "spinlab/rng.hpp"

namespace spinlab {

/// Symmetric d x d matrix of replica overlaps. Construction does not
/// validate; use validate_ultrametric or make_ultrametric.
class UltrametricMatrix {
public:
    UltrametricMatrix() = default;
    UltrametricMatrix(std::size_t d, std::vector<double> entries);

    std::size_t size() const { return d_; }
    double operator()(std::size_t i, std::size_t j) const { return q_[i * d_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return q_[i * d_ + j]; }
    const std::vector<double>& entries() const { return q_; }

private:
    std::size_t d_ = 0;
    std::vector<double> q_;
};

struct UltrametricVerdict {
    bool valid = true;
    std::string message;
    /// 1-based replica indices of the first violating triple (sorted), if any.
    std::array<std::size_t, 3> triple{0, 0, 0};
};

/// Checks symmetry, diagonal == q_*, off-diagonal entries in the atom set
/// (or 0) and q_ij >= min(q_ik, q_kj) for every triple.
UltrametricVerdict validate_ultrametric(const UltrametricMatrix& q, const ParisiMeasure& measure);

/// Validating constructor; throws ConfigError naming the violation.
UltrametricMatrix make_ultrametric(std::size_t d, std::vector<double> entries,
                                   const ParisiMeasure& measure);

/// Node of a truncated Ruelle cascade (breadth-first storage).
struct CascadeNode {
    std::int32_t parent = -1;
    std::int32_t depth = 0;
    std::int32_t first_child = -1;
    std::int32_t n_children = 0;
    double log_point = 0.0;  // log of the unnormalized Poisson point
    double eta = 0.0;        // standard Gaussian attached to the node
};

/// Truncated Ruelle probability cascade for an atomic zeta.
///
/// Tree depth D = knots.size() - 1 with knots = level_knots(measure); two
/// leaves whose common ancestor sits at depth k have overlap knots[k]. a node at depth d has children from the
/// Poisson process with intensity c x^{-1-c} dx, c = m(knots[d]), truncated to
/// its K largest points (a single child when c == 0). Leaf weights are the
/// product of points along the path, normalized over all leaves.
class CascadeRealization {
public:
    std::size_t depth() const { return knots_.size() - 1; }
    std::size_t truncation() const { return truncation_; }
    const std::vector<double>& knots() const { return knots_; }
    /// Branching parameter used at each depth 0..D-1.
    const std::vector<double>& branching() const { return branching_; }
    double h() const { return h_; }

    const std::vector<CascadeNode>& nodes() const { return nodes_; }
    std::vector<CascadeNode>& nodes() { return nodes_; }
    std::size_t leaf_count() const { return weights_.size(); }
    std::size_t leaf_node(std::size_t leaf) const { return first_leaf_ + leaf; }
    const std::vector<double>& weights() const { return weights_; }

    /// Depth of the least common ancestor of two leaves.
    std::size_t meet_depth(std::size_t a, std::size_t b) const;
    double overlap(std::size_t a, std::size_t b) const { return knots_[meet_depth(a, b)]; }
    /// Node indices on the path root -> leaf, excluding the root.
    std::vector<std::size_t> path(std::size_t leaf) const;

    /// Mean estimated fraction of each branching node's mass lost to
    /// truncation, per depth (0 for single-child levels).
    const std::vector<double>& tail_mass() const { return tail_mass_; }

    friend CascadeRealization sample_cascade(const ParisiMeasure& measure, std::size_t K,
                                             std::uint64_t seed);

private:
    std::vector<double> knots_;
    std::vector<double> branching_;
    std::size_t truncation_ = 0;
    double h_ = 0.0;
    std::vector<CascadeNode> nodes_;
    std::size_t first_leaf_ = 0;
    std::vector<double> weights_;
    std::vector<double> tail_mass_;
};

CascadeRealization sample_cascade(const ParisiMeasure& measure, std::size_t K, std::uint64_t seed);

/// Draws n leaf indices i.i.d. with probabilities w.
std::vector<std::size_t> sample_leaves(const CascadeRealization& cascade, std::size_t n, Rng& rng);

/// Overlap matrix of n leaves drawn i.i.d. from the cascade weights.
UltrametricMatrix sample_overlaps(const CascadeRealization& cascade, std::size_t n,
                                  std::uint64_t seed);
UltrametricMatrix overlaps_of(const CascadeRealization& cascade, const std::vector<std::size_t>& leaves);

/// Exact overlap array of n replicas from the untruncated cascade, sampled
/// through nested Chinese restaurant processes (finest level CRP(c_{D-1}),
/// coarser levels by coagulation with CRP(c_{d-1}/c_d)).
UltrametricMatrix sample_overlap_array(const ParisiMeasure& measure, std::size_t n, Rng& rng);

/// h + sum over the path of eta * sqrt(xi'(knot_d) - xi'(knot_{d-1})).
double untilted_field(const CascadeRealization& cascade, const MixtureSpec& mixture, std::size_t leaf);

/// Per-depth increment standard deviations sqrt(xi'(knot_d) - xi'(knot_{d-1})), d = 1..D.
std::vector<double> cascade_increments(const MixtureSpec& mixture, const std::vector<double>& knots);

}  // namespace spinlab
