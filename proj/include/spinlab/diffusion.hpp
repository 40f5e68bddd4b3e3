#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "spinlab/parisi.hpp"
#include "spinlab/ultrametric.hpp"

namespace spinlab {

/// Simulation time grid on [0, 1]: `steps_per_unit` uniform steps, refined
/// four-fold within ten base steps of every atom, and containing every atom
/// and every requested time exactly.
struct TimeGrid {
    std::vector<double> times;

    std::size_t size() const { return times.size(); }
    /// Index of an exact grid time; throws ConfigError if t is not on the grid.
    std::size_t index_of(double t) const;
};

inline constexpr int kMinStepsPerUnit = 1000;

TimeGrid make_time_grid(const ParisiMeasure& measure, int steps_per_unit,
                        std::span<const double> extra_times = {});

/// Shared-noise structure for a set of paths. For each path and each
/// segment [knots[s], knots[s+1]) of the level knots, labels give the
/// smallest replica index in the same cluster (replicas i, j share noise
/// while t < q_ij).
class ClusterPlan {
public:
    ClusterPlan(std::vector<double> knots, std::size_t replicas);

    /// Appends one path governed by overlap matrix q (entries must be knots).
    void add(const UltrametricMatrix& q);
    /// Appends `count` paths with no sharing at all.
    void add_independent(std::size_t count);

    std::size_t paths() const { return paths_; }
    std::size_t replicas() const { return d_; }
    const std::vector<double>& knots() const { return knots_; }
    /// Segment containing time t.
    std::size_t segment(double t) const;
    const std::uint32_t* labels(std::size_t path, std::size_t segment) const {
        return labels_.data() + (path * knots_.size() + segment) * d_;
    }

private:
    std::vector<double> knots_;
    std::size_t d_;
    std::size_t paths_ = 0;
    std::vector<std::uint32_t> labels_;
};

/// State of n paths of d replicas, stored path-major ([p * d + i]).
struct Ensemble {
    std::size_t n = 0;
    std::size_t d = 1;
    std::vector<double> B, Y, X;

    Ensemble() = default;
    Ensemble(std::size_t paths, std::size_t replicas, double h);
    std::size_t at(std::size_t p, std::size_t i) const { return p * d + i; }
};

/// Euler–Maruyama stepper for the coupled driving (B), cavity (Y) and
/// local-field (X) processes. Y increments are exact Gaussians of variance
/// xi'(t_{k+1}) - xi'(t_k); the drift over a step is m(t_k) u_x(t_k, X) times
/// the same xi' increment.
class PathEngine {
public:
    PathEngine(const PdeSolution& sol, TimeGrid grid);

    const TimeGrid& grid() const { return grid_; }
    const PdeSolution& solution() const { return *sol_; }

    /// Called after reaching grid index k for paths [p0, p1).
    using Observer = std::function<void(std::size_t k, std::size_t p0, std::size_t p1)>;

    /// Advances every path from grid index k0 to k1. Paths are processed in
    /// blocks of `block_size`, block b drawing from stream (seed, label, b);
    /// observe[k] selects the indices at which the observer runs (it also runs
    /// at k0 when selected). Blocks may run on `threads` workers.
    void advance(Ensemble& ens, const ClusterPlan& plan, std::size_t k0, std::size_t k1, std::uint64_t seed,
                 std::string_view label, const std::vector<char>& observe = {}, const Observer& observer = {},
                 unsigned threads = 1) const;

    static constexpr std::size_t block_size = 2048;

private:
    struct Step {
        double sd = 0.0;      // sqrt(xi'(t_{k+1}) - xi'(t_k))
        double sd_b = 0.0;    // sqrt(t_{k+1} - t_k)
        double drift = 0.0;   // m(t_k) * (xi'(t_{k+1}) - xi'(t_k))
        TimeSlice slice;
        std::size_t segment = 0;
    };
    const PdeSolution* sol_;
    TimeGrid grid_;
    std::vector<Step> steps_;
};

/// One coupled realization with full paths of every replica.
class PathBundle {
public:
    const UltrametricMatrix& overlaps() const { return q_; }
    const std::vector<double>& times() const { return times_; }
    std::size_t replicas() const { return q_.size(); }
    std::uint64_t seed() const { return seed_; }

    double B(std::size_t i, std::size_t k) const { return b_[i * times_.size() + k]; }
    double Y(std::size_t i, std::size_t k) const { return y_[i * times_.size() + k]; }
    double X(std::size_t i, std::size_t k) const { return x_[i * times_.size() + k]; }
    double M(std::size_t i, std::size_t k) const { return m_[i * times_.size() + k]; }

    friend PathBundle simulate_bundle(const PdeSolution& sol, const UltrametricMatrix& q, int steps,
                                      std::uint64_t seed);

private:
    UltrametricMatrix q_;
    std::vector<double> times_;
    std::uint64_t seed_ = 0;
    std::vector<double> b_, y_, x_, m_;
};

/// Simulates one bundle for replicas with overlap matrix q on a grid of
/// `steps` steps per unit time (at least 1000).
PathBundle simulate_bundle(const PdeSolution& sol, const UltrametricMatrix& q, int steps, std::uint64_t seed);

/// Running sum of products of Y increments of replicas i != j on the grid.
std::vector<double> empirical_bracket(const PathBundle& bundle, std::size_t i, std::size_t j);

struct Continuations {
    std::vector<double> x1;
    std::vector<double> tanh_x1;
    double mean_y() const;
    double mean_s() const;
};

/// Freezes replica i up to grid time q and runs n_branches independent
/// continuations to time 1.
Continuations conditional_continuation(const PdeSolution& sol, const PathBundle& bundle, std::size_t i, double q,
                                       std::size_t n_branches, std::uint64_t seed);

/// Ensemble statistics of a single replica: mean and standard error of
/// u_x(t, X_t), X_t and the running Y bracket of a replica pair at each checkpoint.
struct CheckpointStats {
    double t = 0.0;
    Estimate magnetization;
    Estimate field;
    Estimate bracket;  // only when a pair is simulated
    double bracket_target = 0.0;
};

/// Simulates n_paths bundles on the fixed overlap matrix q and reports
/// statistics at the checkpoints (grid times). When q has two or more
/// replicas the bracket of replicas 0 and 1 is tracked.
std::vector<CheckpointStats> ensemble_checkpoints(const PdeSolution& sol, const UltrametricMatrix& q,
                                                  std::size_t n_paths, int steps,
                                                  std::span<const double> checkpoints, std::uint64_t seed,
                                                  unsigned threads = 1);

/// Ten checkpoints spread uniformly over (0, 1].
std::vector<double> default_checkpoints();

}  // namespace spinlab
