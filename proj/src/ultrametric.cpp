#include "spinlab/ultrametric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "spinlab/errors.hpp"

namespace spinlab {

namespace {

constexpr double kEntryTol = 1e-12;

bool in_support(double v, const ParisiMeasure& measure) {
    if (std::abs(v) <= kEntryTol) return true;
    for (const auto& a : measure.atoms())
        if (std::abs(v - a.location) <= kEntryTol) return true;
    return false;
}

}  // namespace

UltrametricMatrix::UltrametricMatrix(std::size_t d, std::vector<double> entries)
    : d_(d), q_(std::move(entries)) {
    if (q_.size() != d * d) throw ConfigError("overlap matrix: expected d*d entries");
}

UltrametricVerdict validate_ultrametric(const UltrametricMatrix& q, const ParisiMeasure& measure) {
    UltrametricVerdict v;
    const std::size_t d = q.size();
    auto fail = [&](std::string msg, std::size_t i, std::size_t j, std::size_t k) {
        v.valid = false;
        v.message = std::move(msg);
        std::array<std::size_t, 3> t{i + 1, j + 1, k + 1};
        std::sort(t.begin(), t.end());
        v.triple = t;
        return v;
    };
    for (std::size_t i = 0; i < d; ++i) {
        if (std::abs(q(i, i) - measure.q_star()) > kEntryTol) {
            std::ostringstream os;
            os << "diagonal entry (" << i + 1 << "," << i + 1 << ") = " << q(i, i) << " differs from q_* = "
               << measure.q_star();
            return fail(os.str(), i, i, i);
        }
        for (std::size_t j = i + 1; j < d; ++j) {
            if (q(i, j) != q(j, i)) {
                std::ostringstream os;
                os << "entries (" << i + 1 << "," << j + 1 << ") and (" << j + 1 << "," << i + 1 << ") differ";
                return fail(os.str(), i, j, j);
            }
            if (!in_support(q(i, j), measure)) {
                std::ostringstream os;
                os << "entry (" << i + 1 << "," << j + 1 << ") = " << q(i, j) << " is not an atom of zeta";
                return fail(os.str(), i, j, j);
            }
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            for (std::size_t k = 0; k < d; ++k) {
                if (k == i || k == j) continue;
                if (q(i, j) < std::min(q(i, k), q(k, j)) - kEntryTol) {
                    std::ostringstream os;
                    os << "ultrametric inequality fails: q(" << i + 1 << "," << j + 1 << ") = " << q(i, j)
                       << " < min(q(" << i + 1 << "," << k + 1 << "), q(" << k + 1 << "," << j + 1
                       << ")) = " << std::min(q(i, k), q(k, j));
                    return fail(os.str(), i, j, k);
                }
            }
    return v;
}

UltrametricMatrix make_ultrametric(std::size_t d, std::vector<double> entries, const ParisiMeasure& measure) {
    UltrametricMatrix q(d, std::move(entries));
    const auto v = validate_ultrametric(q, measure);
    if (!v.valid) throw ConfigError("overlap matrix: " + v.message);
    return q;
}

std::size_t CascadeRealization::meet_depth(std::size_t a, std::size_t b) const {
    auto na = static_cast<std::int32_t>(leaf_node(a));
    auto nb = static_cast<std::int32_t>(leaf_node(b));
    std::size_t d = depth();
    while (na != nb) {
        na = nodes_[na].parent;
        nb = nodes_[nb].parent;
        --d;
    }
    return d;
}

std::vector<std::size_t> CascadeRealization::path(std::size_t leaf) const {
    std::vector<std::size_t> out(depth());
    auto n = static_cast<std::int32_t>(leaf_node(leaf));
    for (std::size_t d = depth(); d > 0; --d) {
        out[d - 1] = static_cast<std::size_t>(n);
        n = nodes_[n].parent;
    }
    return out;
}

CascadeRealization sample_cascade(const ParisiMeasure& measure, std::size_t K, std::uint64_t seed) {
    if (K < 50) throw ConfigError("cascade: truncation K must be at least 50");
    CascadeRealization c;
    c.knots_ = level_knots(measure);
    c.truncation_ = K;
    c.h_ = measure.h();
    const std::size_t D = c.depth();
    for (std::size_t d = 0; d < D; ++d) {
        const double b = measure.cdf(c.knots_[d]);
        if (!(b >= 0.0 && b < 1.0)) throw ConfigError("cascade: unsupported measure (branching parameter outside [0,1))");
        c.branching_.push_back(b);
    }
    // Size check before allocating.
    double count = 1.0;
    for (double b : c.branching_) count *= (b > 0.0 ? static_cast<double>(K) : 1.0);
    if (count > 5e7) throw ConfigError("cascade: tree too large; reduce K or the number of atoms");

    Rng rng = make_rng(seed, "cascade");
    std::exponential_distribution<double> expo(1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    c.nodes_.push_back(CascadeNode{});
    c.tail_mass_.assign(D, 0.0);
    std::size_t level_begin = 0, level_end = 1;
    for (std::size_t d = 0; d < D; ++d) {
        const double b = c.branching_[d];
        const std::size_t nchild = b > 0.0 ? K : 1;
        double tail_sum = 0.0;
        for (std::size_t p = level_begin; p < level_end; ++p) {
            c.nodes_[p].first_child = static_cast<std::int32_t>(c.nodes_.size());
            c.nodes_[p].n_children = static_cast<std::int32_t>(nchild);
            double gamma = 0.0, mass = 0.0, logmax = 0.0;
            for (std::size_t k = 0; k < nchild; ++k) {
                CascadeNode n;
                n.parent = static_cast<std::int32_t>(p);
                n.depth = static_cast<std::int32_t>(d + 1);
                if (b > 0.0) {
                    gamma += expo(rng);
                    n.log_point = -std::log(gamma) / b;
                    if (k == 0) logmax = n.log_point;
                    mass += std::exp(n.log_point - logmax);
                }
                n.eta = normal(rng);
                c.nodes_.push_back(n);
            }
            if (b > 0.0) {
                // Expected mass of the discarded points beyond the K-th, relative to the kept mass.
                const double uK = std::exp(-std::log(gamma) / b - logmax);
                const double tail = uK * gamma * b / (1.0 - b);
                tail_sum += tail / (mass + tail);
            }
        }
        c.tail_mass_[d] = tail_sum / static_cast<double>(level_end - level_begin);
        level_begin = level_end;
        level_end = c.nodes_.size();
    }
    c.first_leaf_ = level_begin;
    const std::size_t nleaves = level_end - level_begin;
    std::vector<double> logw(nleaves);
    double lmax = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < nleaves; ++l) {
        double s = 0.0;
        for (auto n = static_cast<std::int32_t>(level_begin + l); n > 0; n = c.nodes_[n].parent)
            s += c.nodes_[n].log_point;
        logw[l] = s;
        lmax = std::max(lmax, s);
    }
    c.weights_.resize(nleaves);
    double total = 0.0;
    for (std::size_t l = 0; l < nleaves; ++l) total += c.weights_[l] = std::exp(logw[l] - lmax);
    for (double& w : c.weights_) w /= total;
    return c;
}

std::vector<std::size_t> sample_leaves(const CascadeRealization& cascade, std::size_t n, Rng& rng) {
    const auto& w = cascade.weights();
    std::vector<double> cdf(w.size());
    std::partial_sum(w.begin(), w.end(), cdf.begin());
    std::uniform_real_distribution<double> unif(0.0, cdf.back());
    std::vector<std::size_t> out(n);
    for (auto& leaf : out) {
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), unif(rng));
        leaf = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), w.size() - 1);
    }
    return out;
}

UltrametricMatrix overlaps_of(const CascadeRealization& cascade, const std::vector<std::size_t>& leaves) {
    const std::size_t n = leaves.size();
    UltrametricMatrix q(n, std::vector<double>(n * n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) q(i, j) = q(j, i) = cascade.overlap(leaves[i], leaves[j]);
    return q;
}

UltrametricMatrix sample_overlaps(const CascadeRealization& cascade, std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed, "overlaps");
    return overlaps_of(cascade, sample_leaves(cascade, n, rng));
}

namespace {

// Chinese restaurant process with discount alpha and concentration 0 over n
// customers; returns the table of each customer.
std::vector<std::size_t> crp(std::size_t n, double alpha, Rng& rng) {
    std::vector<std::size_t> table(n);
    std::vector<double> sizes;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0) {
            sizes.push_back(1.0);
            table[i] = 0;
            continue;
        }
        const double k = static_cast<double>(sizes.size());
        double u = unif(rng) * static_cast<double>(i);
        if (u < k * alpha) {
            table[i] = sizes.size();
            sizes.push_back(1.0);
            continue;
        }
        u -= k * alpha;
        std::size_t j = 0;
        for (; j + 1 < sizes.size(); ++j) {
            if (u < sizes[j] - alpha) break;
            u -= sizes[j] - alpha;
        }
        table[i] = j;
        sizes[j] += 1.0;
    }
    return table;
}

}  // namespace

UltrametricMatrix sample_overlap_array(const ParisiMeasure& measure, std::size_t n, Rng& rng) {
    const auto knots = level_knots(measure);
    const std::size_t D = knots.size() - 1;
    std::vector<double> b(D);
    for (std::size_t d = 0; d < D; ++d) b[d] = measure.cdf(knots[d]);
    // block[d][i]: depth-d ancestor of the leaf picked by replica i. Replicas
    // share a leaf with CRP(b[D-1]) statistics; depth-d ancestors are merged
    // from depth d+1 with CRP(b[d-1]/b[d]). Depth 0 is the root.
    std::vector<std::vector<std::size_t>> block(D + 1, std::vector<std::size_t>(n, 0));
    if (D > 0) {
        block[D] = crp(n, b[D - 1], rng);
        for (std::size_t d = D - 1; d >= 1; --d) {
            const std::size_t nblocks = *std::max_element(block[d + 1].begin(), block[d + 1].end()) + 1;
            const auto merge = crp(nblocks, b[d - 1] / b[d], rng);
            for (std::size_t i = 0; i < n; ++i) block[d][i] = merge[block[d + 1][i]];
        }
    }
    UltrametricMatrix q(n, std::vector<double>(n * n));
    for (std::size_t i = 0; i < n; ++i) {
        q(i, i) = knots[D];
        for (std::size_t j = i + 1; j < n; ++j) {
            std::size_t d = D;
            while (d > 0 && block[d][i] != block[d][j]) --d;
            q(i, j) = q(j, i) = knots[d];
        }
    }
    return q;
}

std::vector<double> cascade_increments(const MixtureSpec& mixture, const std::vector<double>& knots) {
    std::vector<double> sig;
    for (std::size_t d = 1; d < knots.size(); ++d)
        sig.push_back(std::sqrt(std::max(0.0, mixture.xi_prime(knots[d]) - mixture.xi_prime(knots[d - 1]))));
    return sig;
}

double untilted_field(const CascadeRealization& cascade, const MixtureSpec& mixture, std::size_t leaf) {
    const auto sig = cascade_increments(mixture, cascade.knots());
    double f = cascade.h();
    for (auto n = static_cast<std::int32_t>(cascade.leaf_node(leaf)); n > 0; n = cascade.nodes()[n].parent)
        f += cascade.nodes()[n].eta * sig[static_cast<std::size_t>(cascade.nodes()[n].depth) - 1];
    return f;
}

}  // namespace spinlab
