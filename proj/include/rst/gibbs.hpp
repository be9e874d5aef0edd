#pragma once

// Hamiltonian of the Gibbs model on projected diagrams: delta-truncated
// k-nearest-neighbor clusters, cluster lengths, horizontal/vertical spread
// terms, and the conditional single-point energy used by the
// pseudolikelihood and the MCMC acceptance ratio.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "rst/diagram.hpp"

namespace rst {

struct Theta {
    double theta_H = 1.0;
    double theta_V = 1.0;
    std::vector<double> theta_k;  // theta_1 .. theta_K

    int K() const { return static_cast<int>(theta_k.size()); }
};

struct Neighborhood {
    std::vector<PpdPoint> members;   // sorted by ascending distance to center
    std::vector<double> distances;
    bool empty() const { return members.empty(); }
};

// k nearest neighbors of x among ppd's points, all within delta; empty if
// fewer than k qualify. exclude_index skips one configuration point (x
// itself when x is a member of the configuration); pass -1 for outside
// points. Distance ties break by smaller point index.
inline Neighborhood neighborhood(const PpdPoint& x, int k, const ProjectedDiagram& ppd,
                                 double delta, long exclude_index = -1) {
    if (k < 1) throw error("neighborhood: k must be >= 1");
    const std::size_t n = ppd.size();
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<long>(i) == exclude_index) continue;
        cand.emplace_back(dist(x, ppd.points[i]), i);
    }
    if (cand.size() < static_cast<std::size_t>(k)) return {};
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    if (cand[k - 1].first > delta) return {};
    Neighborhood nb;
    nb.members.reserve(k);
    nb.distances.reserve(k);
    for (int i = 0; i < k; ++i) {
        nb.members.push_back(ppd.points[cand[i].second]);
        nb.distances.push_back(cand[i].first);
    }
    return nb;
}

inline double cluster_length(const PpdPoint& x, int k, const ProjectedDiagram& ppd,
                             double delta, long exclude_index = -1) {
    const Neighborhood nb = neighborhood(x, k, ppd, delta, exclude_index);
    return std::accumulate(nb.distances.begin(), nb.distances.end(), 0.0);
}

inline double total_cluster_length(int k, const ProjectedDiagram& ppd, double delta) {
    double total = 0.0;
    for (std::size_t i = 0; i < ppd.size(); ++i)
        total += cluster_length(ppd.points[i], k, ppd, delta, static_cast<long>(i));
    return total;
}

struct SpreadTerms {
    double sigma_H_sq = 0.0;  // centered sum of squares of x1 (not divided by N)
    double sigma_V_sq = 0.0;  // uncentered sum of squares of x2
    double xbar1 = 0.0;
};

inline SpreadTerms spread_terms(const ProjectedDiagram& ppd) {
    if (ppd.size() == 0) throw error("spread_terms: empty diagram");
    SpreadTerms s;
    for (const auto& p : ppd.points) s.xbar1 += p.x1;
    s.xbar1 /= static_cast<double>(ppd.size());
    for (const auto& p : ppd.points) {
        s.sigma_H_sq += (p.x1 - s.xbar1) * (p.x1 - s.xbar1);
        s.sigma_V_sq += p.x2 * p.x2;
    }
    return s;
}

inline double hamiltonian(const ProjectedDiagram& ppd, const Theta& theta,
                          const ModelConfig& config) {
    if (config.K != theta.K())
        throw error("hamiltonian: config.K != theta.theta_k size");
    const SpreadTerms s = spread_terms(ppd);
    double h = theta.theta_H * s.sigma_H_sq + theta.theta_V * s.sigma_V_sq;
    for (int k = 1; k <= config.K; ++k)
        h += theta.theta_k[k - 1] * total_cluster_length(k, ppd, config.delta);
    return h;
}

// Per-k neighborhoods of one configuration point, held fixed while the
// conditional energy is evaluated at a moving point z.
inline std::vector<Neighborhood> neighborhoods_of(const PpdPoint& x, int K,
                                                  const ProjectedDiagram& ppd,
                                                  double delta, long exclude_index) {
    // single candidate sort shared across all k
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(ppd.size());
    for (std::size_t i = 0; i < ppd.size(); ++i) {
        if (static_cast<long>(i) == exclude_index) continue;
        cand.emplace_back(dist(x, ppd.points[i]), i);
    }
    const std::size_t avail = cand.size();
    const std::size_t kk = std::min<std::size_t>(K, avail);
    std::partial_sort(cand.begin(), cand.begin() + kk, cand.end());

    std::vector<Neighborhood> nbs(K);
    for (int k = 1; k <= K; ++k) {
        if (static_cast<std::size_t>(k) > avail || cand[k - 1].first > delta) continue;
        Neighborhood& nb = nbs[k - 1];
        nb.members.reserve(k);
        nb.distances.reserve(k);
        for (int i = 0; i < k; ++i) {
            nb.members.push_back(ppd.points[cand[i].second]);
            nb.distances.push_back(cand[i].first);
        }
    }
    return nbs;
}

// Conditional Hamiltonian at z against the fixed neighborhoods of the
// current point: theta_H (z1 - xbar1)^2 + theta_V z2^2 + sum_k theta_k L_k.
// The empty-neighborhood rule is re-applied at z: the k-term vanishes
// unless every fixed member lies within delta of z.
inline double conditional_energy(const PpdPoint& z, const std::vector<Neighborhood>& nbhd_sets,
                                 double xbar1, const Theta& theta, const ModelConfig& config) {
    double e = theta.theta_H * (z.x1 - xbar1) * (z.x1 - xbar1) +
               theta.theta_V * z.x2 * z.x2;
    for (int k = 1; k <= config.K; ++k) {
        const Neighborhood& nb = nbhd_sets[k - 1];
        if (nb.empty()) continue;
        double len = 0.0;
        bool all_within = true;
        for (const auto& y : nb.members) {
            const double d = dist(z, y);
            if (d > config.delta) { all_within = false; break; }
            len += d;
        }
        if (all_within) e += theta.theta_k[k - 1] * len;
    }
    return e;
}

}  // namespace rst
